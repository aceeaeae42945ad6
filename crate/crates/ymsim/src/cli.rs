//! Argument parsing, output writing and exit codes.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::json;
use ymsim_core::experiments::ExperimentSpec;
use ymsim_core::hyperfine::{SearchRanges, SpeciesAssignment};

use crate::commands::{self, EvolveOptions, GroundOptions, Initial, Model, Outcome, ScanOptions, TruncationOptions};
use crate::config::{read_json, solver_config, ModelArgs, RunConfig, DEFAULT_OUT};
use crate::error::CliError;
use crate::format::{to_json, write_atomic};

#[derive(Debug, Parser)]
#[command(name = "ymsim", version, about = "SU(2) lattice gauge theory simulator for cold-atom link models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory.
    #[arg(long, global = true, env = "YMSIM_OUT", default_value = DEFAULT_OUT)]
    pub out: PathBuf,
    /// Seed of the Lanczos start vector.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Lanczos basis size per restart.
    #[arg(long, global = true)]
    pub krylov_dim: Option<usize>,
    /// Lanczos restarts allowed per eigenpair.
    #[arg(long, global = true)]
    pub max_restarts: Option<usize>,
    /// Recorded in the config; computations run on one thread.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the SU(2) algebra of one link's Schwinger-boson operators.
    VerifyAlgebra {
        #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3])]
        cutoff: Vec<u8>,
    },
    /// Lowest eigenpairs of the chain Hamiltonian.
    Ground {
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long, value_enum, default_value_t = Model::Target)]
        model: Model,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        /// Number of psi fermions; half filling when omitted.
        #[arg(long)]
        psi_count: Option<u32>,
        /// Diagonalize densely inside the Gauss-singlet subspace.
        #[arg(long)]
        singlet: bool,
        #[arg(long)]
        write_state: bool,
        #[arg(long)]
        write_hamiltonian: bool,
    },
    /// Real-time evolution with a CSV trace of observables.
    Evolve {
        #[command(flatten)]
        model_args: ModelArgs,
        /// vacuum, meson:LEN[@START] or baryon:VERTEX
        #[arg(long, default_value = "vacuum")]
        initial: Initial,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long)]
        write_state: bool,
    },
    /// Spectral error of the eliminated model against the microscopic chain.
    EffectiveScan {
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        levels: usize,
    },
    /// Compare full and truncated hopping on the subspace reached from a state.
    TruncationCheck {
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 3.0])]
        times: Vec<f64>,
        /// Initial occupations in registry order, comma separated.
        #[arg(long, value_delimiter = ',')]
        occupations: Option<Vec<u8>>,
        /// Allow initial links above j = 1/2.
        #[arg(long)]
        unchecked: bool,
    },
    /// m_F selection rules of the atomic species.
    Hyperfine {
        #[command(subcommand)]
        action: HyperfineCommand,
    },
    /// Scripted studies read from a JSON spec.
    Experiment {
        #[command(subcommand)]
        action: ExperimentCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum HyperfineCommand {
    /// Build both selection tables and check every rule.
    Validate(ValidateArgs),
    /// Enumerate valid assignments inside per-species ranges.
    Search {
        #[arg(long)]
        ranges: PathBuf,
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ValidateArgs {
    /// JSON object mapping species names to m_F values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the built-in reference assignment.
    #[arg(long)]
    pub reference: bool,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    Run {
        #[arg(long)]
        spec: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyAlgebra { .. } => "verify-algebra",
            Command::Ground { .. } => "ground",
            Command::Evolve { .. } => "evolve",
            Command::EffectiveScan { .. } => "effective-scan",
            Command::TruncationCheck { .. } => "truncation-check",
            Command::Hyperfine { action: HyperfineCommand::Validate(_) } => "hyperfine validate",
            Command::Hyperfine { action: HyperfineCommand::Search { .. } } => "hyperfine search",
            Command::Experiment { .. } => "experiment run",
        }
    }
}

/// Run the parsed command without touching the filesystem for output.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let name = cli.command.name();
    let solver = solver_config(cli.seed, cli.krylov_dim, cli.max_restarts);
    let cfg = |params| RunConfig::new(name, params, solver.clone(), cli.threads);
    match &cli.command {
        Command::VerifyAlgebra { cutoff } => {
            let mut c = cfg(None);
            c.options = json!({ "cutoffs": cutoff });
            commands::verify_algebra(cutoff, c)
        }
        Command::Ground { model_args, model, levels, psi_count, singlet, write_state, write_hamiltonian } => {
            let p = model_args.resolve()?;
            let opts = GroundOptions {
                model: *model,
                levels: *levels,
                psi_count: *psi_count,
                singlet: *singlet,
                write_state: *write_state,
                write_hamiltonian: *write_hamiltonian,
            };
            commands::ground(&p, &opts, cfg(Some(p.clone())))
        }
        Command::Evolve { model_args, initial, time, samples, write_state } => {
            let p = model_args.resolve()?;
            let opts = EvolveOptions { initial: initial.clone(), time: *time, samples: *samples, write_state: *write_state };
            commands::evolve_run(&p, &opts, cfg(Some(p.clone())))
        }
        Command::EffectiveScan { model_args, lambdas, levels } => {
            let p = model_args.resolve()?;
            commands::effective_scan(&p, &ScanOptions { lambdas: lambdas.clone(), levels: *levels }, cfg(Some(p.clone())))
        }
        Command::TruncationCheck { model_args, depth, times, occupations, unchecked } => {
            let p = model_args.resolve()?;
            let opts = TruncationOptions { depth: *depth, times: times.clone(), occupations: occupations.clone(), unchecked: *unchecked };
            commands::truncation_check(&p, &opts, cfg(Some(p.clone())))
        }
        Command::Hyperfine { action: HyperfineCommand::Validate(args) } => {
            let a = match &args.config {
                Some(path) => read_json::<SpeciesAssignment>(path)?,
                None => SpeciesAssignment::reference(),
            };
            commands::hyperfine_validate(&a, cfg(None))
        }
        Command::Hyperfine { action: HyperfineCommand::Search { ranges, limit } } => {
            let r = read_json::<SearchRanges>(ranges)?;
            commands::hyperfine_search(&r, *limit, cfg(None))
        }
        Command::Experiment { action: ExperimentCommand::Run { spec } } => {
            let s = read_json::<ExperimentSpec>(spec)?;
            commands::experiment(&s, cfg(None))
        }
    }
}

/// Write `result.json`, `config.json`, the artifacts and `metadata.json`.
pub fn write_outputs(dir: &Path, out: &Outcome, wall_seconds: f64) -> Result<(), CliError> {
    let put = |name: &str, text: &str| {
        let path = dir.join(name);
        write_atomic(&path, text).map_err(|e| CliError::io(&path, e))
    };
    put("result.json", &out.document()?)?;
    put("config.json", &to_json(&out.config)?)?;
    for (name, text) in &out.artifacts {
        put(name, text)?;
    }
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "schema": crate::format::SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "unix_time": stamp,
        "wall_seconds": wall_seconds,
        "threads": out.config.threads,
        "status": if out.rejected.is_some() { "rejected" } else { "ok" },
    });
    put("metadata.json", &to_json(&meta)?)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Full entry point: parse, run, write, report. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let text = e.render().to_string();
                    let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
                    eprintln!("error[usage]: {}", one_line(first));
                    let rest = text.lines().skip(1).collect::<Vec<_>>().join("\n");
                    if rest.contains("Usage:") {
                        eprintln!("{}", rest);
                    } else {
                        eprintln!("\n{}\n{}", Cli::command().render_usage(), rest.trim_start());
                    }
                    1
                }
            };
        }
    };
    let started = Instant::now();
    let result = execute(&cli).and_then(|out| {
        write_outputs(&cli.out, &out, started.elapsed().as_secs_f64())?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for line in &out.summary {
                let _ = writeln!(lock, "{}", line);
            }
            match &out.rejected {
                Some(reason) => {
                    eprintln!("error[rejected]: {}", one_line(reason));
                    1
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), one_line(&e.to_string()));
            e.exit_code()
        }
    }
}
