//! Run configuration: model parameters from flags and files, solver caps,
//! output location.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use ymsim_core::hamiltonian::{BathMode, ModelParams};
use ymsim_core::solver::SolverConfig;

use crate::error::CliError;
use crate::format::SCHEMA;

/// Default output directory when neither `--out` nor `YMSIM_OUT` is set.
pub const DEFAULT_OUT: &str = "ymsim-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BathArg {
    Meanfield,
    Explicit,
}

/// Model flags shared by the physics subcommands. Flags override values
/// read from `--params`.
#[derive(Clone, Debug, Default, Args)]
pub struct ModelArgs {
    /// JSON file with model parameters.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub sites: Option<usize>,
    /// Total boson cap per link end.
    #[arg(long)]
    pub cutoff: Option<u8>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Hopping amplitude; derived from epsilon and lambda when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub bath: Option<BathArg>,
    #[arg(long)]
    pub bath_cutoff: Option<u8>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {}", path.display(), e)))
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<ModelParams, CliError> {
        let mut p = match &self.params {
            Some(path) => read_json::<ModelParams>(path)?,
            None => ModelParams::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { p.$field = v; })* };
        }
        set!(sites, cutoff, g, m, epsilon, lambda, gamma, alpha, bath_cutoff);
        if let Some(b) = self.beta {
            p.beta = Some(b);
        }
        if let Some(b) = self.bath {
            p.bath = match b {
                BathArg::Meanfield => BathMode::Meanfield,
                BathArg::Explicit => BathMode::Explicit,
            };
        }
        p.validate()?;
        Ok(p)
    }
}

/// Everything that determines a run's result, echoed into its output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub schema: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    pub solver: SolverConfig,
    pub threads: usize,
    /// Command-specific settings.
    pub options: serde_json::Value,
}

impl RunConfig {
    pub fn new(command: &str, params: Option<ModelParams>, solver: SolverConfig, threads: usize) -> Self {
        Self { schema: SCHEMA, command: command.to_string(), params, solver, threads, options: serde_json::Value::Null }
    }
}

pub fn solver_config(seed: Option<u64>, krylov_dim: Option<usize>, max_restarts: Option<usize>) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = krylov_dim {
        cfg.krylov_dim = k;
    }
    if let Some(r) = max_restarts {
        cfg.max_restarts = r;
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        fs::write(&path, r#"{"sites": 4, "cutoff": 2, "g": 2.0, "m": 0.1, "beta": 0.5}"#).unwrap();
        let args = ModelArgs { params: Some(path), sites: Some(2), m: Some(0.7), bath: Some(BathArg::Explicit), ..Default::default() };
        let p = args.resolve().unwrap();
        assert_eq!((p.sites, p.cutoff, p.g, p.m, p.beta), (2, 2, 2.0, 0.7, Some(0.5)));
        assert_eq!(p.bath, BathMode::Explicit);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        fs::write(&path, r#"{"sites": 2, "cutoff": 1, "g": 1.0, "m": 0.0, "colour": 3}"#).unwrap();
        let err = ModelArgs { params: Some(path), ..Default::default() }.resolve().unwrap_err();
        assert!(matches!(err, CliError::Parse(_)), "{:?}", err);
        let err = ModelArgs { cutoff: Some(0), ..Default::default() }.resolve().unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn solver_overrides() {
        let c = solver_config(Some(7), Some(12), None);
        assert_eq!((c.seed, c.krylov_dim, c.max_restarts), (7, 12, SolverConfig::default().max_restarts));
    }
}
