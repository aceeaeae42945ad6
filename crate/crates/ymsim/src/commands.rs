//! Subcommand bodies. Each returns an [`Outcome`]; writing files and mapping
//! errors to exit codes is left to the caller.

use serde::Serialize;
use serde_json::{json, Value};
use ymsim_core::effective::{
    microscopic_basis, spectral_convergence_scan, truncation_deviation_unchecked,
    truncation_equivalence_check, InitialState,
};
use ymsim_core::experiments::{
    physical_basis, prepare_baryon, prepare_meson, prepare_vacuum, run_experiment, vacuum_filling,
    ExperimentOutcome, ExperimentSpec,
};
use ymsim_core::fock::BasisState;
use ymsim_core::hamiltonian::{
    build_gauss_generators, build_he, build_hm, build_microscopic_h, build_target_h, gauss_violation, psi_modes,
    ModelParams,
};
use ymsim_core::hyperfine::{build_tables, search, validate, SearchRanges, SpeciesAssignment, Violation};
use ymsim_core::linkops::LinkOperatorSet;
use ymsim_core::solver::{evolve, expectation, gauss_singlet_projector, ground_state, StateVector};
use ymsim_core::SparseOperator;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::format::{float, state, to_json, triplets, Table};

/// Residual bound for the link algebra.
pub const ALGEBRA_TOLERANCE: f64 = 1e-12;

/// A finished computation: what to write and what to print.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub config: RunConfig,
    pub result: Value,
    /// Extra files, by name relative to the output directory.
    pub artifacts: Vec<(String, String)>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    /// Set when the run completed but its input failed a check.
    pub rejected: Option<String>,
}

impl Outcome {
    fn new(config: RunConfig, result: &impl Serialize) -> Result<Self, CliError> {
        Ok(Self { config, result: serde_json::to_value(result)?, artifacts: Vec::new(), summary: Vec::new(), rejected: None })
    }

    fn artifact(&mut self, name: &str, contents: String) {
        self.artifacts.push((name.to_string(), contents));
    }

    fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    /// The `result.json` document.
    pub fn document(&self) -> Result<String, CliError> {
        Ok(to_json(&json!({
            "schema": self.config.schema,
            "command": self.config.command,
            "config": self.config,
            "result": self.result,
        }))?)
    }
}

pub fn verify_algebra(cutoffs: &[u8], cfg: RunConfig) -> Result<Outcome, CliError> {
    let reports = cutoffs
        .iter()
        .map(|&c| LinkOperatorSet::new(c).map(|s| s.algebra_report()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Outcome::new(cfg, &json!({ "tolerance": ALGEBRA_TOLERANCE, "reports": reports }))?;
    let mut failed = Vec::new();
    for r in &reports {
        out.say(format!("cutoff {} sector {} max_residual {}", r.cutoff, r.sector_dim, float(r.max_residual)));
        if !(r.max_residual <= ALGEBRA_TOLERANCE) {
            failed.push(r.cutoff.to_string());
        }
    }
    if !failed.is_empty() {
        out.rejected = Some(format!("algebra residual above {:e} at cutoff {}", ALGEBRA_TOLERANCE, failed.join(",")));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Gauge theory on the link bosons and psi fermions.
    Target,
    /// Cold-atom chain with chi ancillas and the bath.
    Microscopic,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundOptions {
    pub model: Model,
    pub levels: usize,
    pub psi_count: Option<u32>,
    pub singlet: bool,
    pub write_state: bool,
    pub write_hamiltonian: bool,
}

#[derive(Serialize)]
struct Level {
    energy: f64,
    residual: f64,
    gauss_violation: Option<f64>,
}

pub fn ground(params: &ModelParams, opts: &GroundOptions, mut cfg: RunConfig) -> Result<Outcome, CliError> {
    if opts.levels == 0 {
        return Err(CliError::Rejected("levels must be at least 1".into()));
    }
    let (basis, h) = match opts.model {
        Model::Target => {
            let filling = opts.psi_count.unwrap_or_else(|| vacuum_filling(params.sites));
            let b = physical_basis(params, Some(filling))?;
            let h = build_target_h(params, &b)?;
            (b, h)
        }
        Model::Microscopic => {
            if opts.singlet || opts.psi_count.is_some() {
                return Err(CliError::Rejected("--singlet and --psi-count apply to the target model only".into()));
            }
            let b = microscopic_basis(params)?;
            let h = build_microscopic_h(params, &b)?;
            (b, h)
        }
    };
    cfg.options = serde_json::to_value(opts)?;
    let g2 = match opts.model {
        Model::Target => Some(gauss_violation(&build_gauss_generators(&basis)?, basis.dim())?),
        Model::Microscopic => None,
    };
    let pairs: Vec<(f64, StateVector, f64)> = if opts.singlet {
        let proj = gauss_singlet_projector(basis.dim(), &build_gauss_generators(&basis)?)?;
        let eig = proj.spectrum(&h);
        (0..opts.levels.min(eig.values.len()))
            .map(|k| {
                let v = StateVector::new(proj.lift(&eig.vector(k)));
                let r = residual(&h, &v, eig.values[k]);
                (eig.values[k], v, r)
            })
            .collect()
    } else {
        ground_state(&h, opts.levels, &cfg.solver)?.into_iter().map(|p| (p.value, p.vector, p.residual)).collect()
    };
    let levels: Vec<Level> = pairs
        .iter()
        .map(|(e, v, r)| Level { energy: *e, residual: *r, gauss_violation: g2.as_ref().map(|g| expectation(g, v).re.abs()) })
        .collect();
    let mut out = Outcome::new(cfg, &json!({ "dim": basis.dim(), "levels": levels }))?;
    out.say(format!("dim {}", basis.dim()));
    for (k, l) in levels.iter().enumerate() {
        out.say(format!("E{} {}", k, float(l.energy)));
    }
    if opts.write_state {
        out.artifact("ground_state.txt", state(&pairs[0].1));
    }
    if opts.write_hamiltonian {
        out.artifact("hamiltonian.txt", triplets(&h));
    }
    Ok(out)
}

fn residual(h: &SparseOperator, v: &StateVector, e: f64) -> f64 {
    let hv = h.apply(&v.amplitudes);
    hv.iter().zip(&v.amplitudes).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt()
}

/// Starting state of `evolve`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Initial {
    Vacuum,
    Meson { start: usize, length: usize },
    Baryon { vertex: usize },
}

impl std::str::FromStr for Initial {
    type Err = String;

    /// `vacuum`, `meson:LEN[@START]` or `baryon:VERTEX`.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected vacuum, meson:LEN[@START] or baryon:VERTEX, got {:?}", s);
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match s.split_once(':') {
            None if s == "vacuum" => Ok(Initial::Vacuum),
            Some(("meson", rest)) => match rest.split_once('@') {
                Some((l, n0)) => Ok(Initial::Meson { length: num(l)?, start: num(n0)? }),
                None => Ok(Initial::Meson { length: num(rest)?, start: 0 }),
            },
            Some(("baryon", v)) => Ok(Initial::Baryon { vertex: num(v)? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveOptions {
    pub initial: Initial,
    pub time: f64,
    pub samples: usize,
    pub write_state: bool,
}

pub fn evolve_run(params: &ModelParams, opts: &EvolveOptions, mut cfg: RunConfig) -> Result<Outcome, CliError> {
    if !(opts.time.is_finite() && opts.time >= 0.0) {
        return Err(CliError::Rejected(format!("time must be finite and >= 0, got {}", opts.time)));
    }
    if opts.samples == 0 {
        return Err(CliError::Rejected("samples must be at least 1".into()));
    }
    let filling = vacuum_filling(params.sites) + if matches!(opts.initial, Initial::Baryon { .. }) { 2 } else { 0 };
    let basis = physical_basis(params, Some(filling))?;
    let psi0 = match opts.initial {
        Initial::Vacuum => prepare_vacuum(&basis)?,
        Initial::Meson { start, length } => prepare_meson(&basis, start, length)?,
        Initial::Baryon { vertex } => prepare_baryon(&basis, vertex)?,
    };
    cfg.options = serde_json::to_value(opts)?;
    let h = build_target_h(params, &basis)?;
    let he = build_he(params, &basis)?;
    let hm = build_hm(params, &basis)?;
    let g2 = gauss_violation(&build_gauss_generators(&basis)?, basis.dim())?;
    let reg = basis.registry();
    let occ = (0..params.sites)
        .map(|n| {
            let modes = psi_modes(reg, n)?;
            let d: Vec<f64> = (0..basis.dim()).map(|i| basis.count(i, &modes) as f64).collect();
            Ok(SparseOperator::real_diagonal(&d))
        })
        .collect::<ymsim_core::Result<Vec<_>>>()?;

    let mut header = vec!["time".to_string(), "energy".into(), "electric".into(), "mass".into(), "gauss_violation".into()];
    header.extend((0..params.sites).map(|n| format!("n{}", n)));
    let mut table = Table { header, rows: Vec::new() };
    let mut trace = Vec::new();
    let mut psi = psi0;
    let dt = opts.time / opts.samples as f64;
    let steps = (dt.ceil() as usize).max(1);
    for k in 0..=opts.samples {
        if k > 0 {
            psi = evolve(&h, &psi, dt, steps, &cfg.solver)?;
        }
        let t = dt * k as f64;
        let ev = |op: &SparseOperator| expectation(op, &psi).re;
        let occupations: Vec<f64> = occ.iter().map(ev).collect();
        let row = json!({
            "time": t, "energy": ev(&h), "electric": ev(&he), "mass": ev(&hm),
            "gauss_violation": ev(&g2).abs(), "occupations": occupations,
        });
        let mut cells = vec![float(t), float(ev(&h)), float(ev(&he)), float(ev(&hm)), float(ev(&g2).abs())];
        cells.extend(occupations.iter().map(|&x| float(x)));
        table.push(cells);
        trace.push(row);
    }
    let drift = trace.iter().map(|r| r["gauss_violation"].as_f64().unwrap_or(f64::NAN)).fold(0.0, f64::max);
    let mut out = Outcome::new(cfg, &json!({ "dim": basis.dim(), "max_gauss_violation": drift, "trace": trace }))?;
    out.say(format!("dim {} samples {} max_gauss_violation {}", basis.dim(), opts.samples, float(drift)));
    out.artifact("trace.csv", table.to_csv());
    if opts.write_state {
        out.artifact("final_state.txt", state(&psi));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanOptions {
    pub lambdas: Vec<f64>,
    pub levels: usize,
}

pub fn effective_scan(params: &ModelParams, opts: &ScanOptions, mut cfg: RunConfig) -> Result<Outcome, CliError> {
    cfg.options = serde_json::to_value(opts)?;
    let report = spectral_convergence_scan(params, &opts.lambdas, opts.levels)?;
    let mut table = Table::new(&["lambda", "gap_error", "level_error"]);
    for r in &report.rows {
        table.push(vec![float(r.lambda), float(r.gap_error), float(r.level_error)]);
    }
    let mut out = Outcome::new(cfg, &report)?;
    match report.fitted_p {
        Some(p) => out.say(format!("p {}", float(p))),
        None => out.say("p undefined (vanishing error)"),
    }
    out.artifact("scan.csv", table.to_csv());
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationOptions {
    pub depth: usize,
    pub times: Vec<f64>,
    /// Explicit occupations in registry order; the vacuum when absent.
    pub occupations: Option<Vec<u8>>,
    /// Skip the `j <= 1/2` precondition on the initial links.
    pub unchecked: bool,
}

pub fn truncation_check(params: &ModelParams, opts: &TruncationOptions, mut cfg: RunConfig) -> Result<Outcome, CliError> {
    cfg.options = serde_json::to_value(opts)?;
    let initial = match &opts.occupations {
        Some(o) => InitialState::Occupations(BasisState(o.clone())),
        None => InitialState::Vacuum,
    };
    let report = if opts.unchecked {
        truncation_deviation_unchecked(params, &initial, opts.depth, &opts.times, &cfg.solver)?
    } else {
        truncation_equivalence_check(params, &initial, opts.depth, &opts.times, &cfg.solver)?
    };
    let mut table = Table::new(&["time", "deviation"]);
    for e in &report.evolution {
        table.push(vec![float(e.time), float(e.deviation)]);
    }
    let mut out = Outcome::new(cfg, &report)?;
    out.say(format!(
        "subspace {} compressed_deviation {} high_flux_weight {}",
        report.subspace_dim,
        float(report.max_compressed_deviation),
        float(report.high_flux_weight)
    ));
    out.artifact("evolution.csv", table.to_csv());
    Ok(out)
}

fn describe_violation(v: &Violation) -> String {
    match v {
        Violation::BrokenPair { side, pair, cells, values } => format!(
            "broken_pair side={:?} pair={} {}{}={} {}{}={}",
            side,
            pair,
            cells[0].0.name(),
            cells[0].1.name(),
            values[0],
            cells[1].0.name(),
            cells[1].1.name(),
            values[1]
        ),
        Violation::Collision { side, value, cells } => format!(
            "collision side={:?} value={} cells={}",
            side,
            value,
            cells.iter().map(|(r, c)| format!("{}{}", r.name(), c.name())).collect::<Vec<_>>().join("+")
        ),
    }
}

pub fn hyperfine_validate(assignment: &SpeciesAssignment, mut cfg: RunConfig) -> Result<Outcome, CliError> {
    cfg.options = json!({ "assignment": assignment });
    let v = validate(assignment)?;
    let (left, right) = build_tables(assignment);
    let mut out = Outcome::new(cfg, &json!({ "validation": v, "tables": [left, right] }))?;
    out.say(left.render());
    out.say(right.render());
    out.artifact("tables.txt", format!("{}\n{}", left.render(), right.render()));
    if v.valid {
        out.say("valid");
    } else {
        let reasons: Vec<String> = v.violations.iter().map(describe_violation).collect();
        out.rejected = Some(format!("invalid: {}", reasons.join("; ")));
    }
    Ok(out)
}

pub fn hyperfine_search(ranges: &SearchRanges, limit: usize, mut cfg: RunConfig) -> Result<Outcome, CliError> {
    cfg.options = json!({ "ranges": ranges, "limit": limit });
    let found = search(ranges, limit)?;
    let mut out = Outcome::new(cfg, &json!({ "count": found.len(), "assignments": found }))?;
    out.say(format!("found {}", found.len()));
    Ok(out)
}

pub fn experiment(spec: &ExperimentSpec, mut cfg: RunConfig) -> Result<Outcome, CliError> {
    spec.validate()?;
    cfg.params = Some(spec.params().clone());
    cfg.options = serde_json::to_value(spec)?;
    let outcome = run_experiment(spec, &cfg.solver)?;
    let mut out = Outcome::new(cfg, &outcome)?;
    match &outcome {
        ExperimentOutcome::StringTension(r) => {
            let mut t = Table::new(&["length", "energy", "strong_coupling", "overlap"]);
            for row in &r.rows {
                t.push(vec![row.length.to_string(), float(row.energy), float(row.strong_coupling), float(row.overlap)]);
            }
            out.artifact("string_tension.csv", t.to_csv());
            out.say(format!("slope {} intercept {}", float(r.slope), float(r.intercept)));
        }
        ExperimentOutcome::AdiabaticSweep(r) => {
            let mut t = Table::new(&["time", "g", "m", "energy", "ground_energy", "fidelity", "gauss_violation"]);
            for p in &r.trace {
                t.push(
                    [p.time, p.g, p.m, p.energy, p.ground_energy, p.fidelity, p.gauss_violation].iter().map(|&x| float(x)).collect(),
                );
            }
            out.artifact("sweep.csv", t.to_csv());
            out.say(format!("final_fidelity {}", float(r.final_fidelity)));
        }
        ExperimentOutcome::CutoffStability(r) => {
            let mut t = Table::new(&["time", "electric_c1", "electric_c2", "mass_c1", "mass_c2", "occupation_deviation"]);
            for row in &r.rows {
                t.push(
                    [row.time, row.electric[0], row.electric[1], row.mass[0], row.mass[1], row.occupation_deviation]
                        .iter()
                        .map(|&x| float(x))
                        .collect(),
                );
            }
            out.artifact("stability.csv", t.to_csv());
            out.say(format!("max_deviation {}", float(r.max_deviation)));
        }
    }
    Ok(out)
}
