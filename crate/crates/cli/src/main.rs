mod commands;
mod pipeline;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homog_core::{Error, ErrorClass, RunConfig};

/// Effective Hamiltonians of level-set convex Hamilton-Jacobi equations in
/// random media.
#[derive(Parser, Debug)]
#[command(name = "homog", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, env = "HOMOG_CONFIG")]
    pub config: PathBuf,
    /// Worker threads (0: one per core).
    #[arg(long, env = "HOMOG_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long, env = "HOMOG_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Replace the configured seeds by the same number of consecutive seeds from K.
    #[arg(long, env = "HOMOG_SEED_OVERRIDE", value_name = "K")]
    pub seed_override: Option<u64>,
    /// Global multiplier on tolerances.
    #[arg(long, env = "HOMOG_TOL_SCALE", value_name = "X")]
    pub tol_scale: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Field snapshot of the first realization and the sampled hypotheses.
    GenEnv(Common),
    /// One metric field on a lattice around the origin.
    Metric(Common),
    /// Limit-shape estimate at the configured level.
    Shape(Common),
    /// Effective Hamiltonian table on the p-grid, forward and reversed.
    Effective(Common),
    /// Discounted macroscopic solutions and the agreement report.
    Macro(Common),
    /// Full property suite; refuses a non-empty output directory.
    Verify(Common),
    /// Aggregates the artifacts of an earlier run for plotting.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory holding the artifacts to aggregate.
        #[arg(long, env = "HOMOG_FROM")]
        from: PathBuf,
    },
}

fn load(common: &Common) -> homog_core::Result<RunConfig> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(k) = common.seed_override {
        cfg.override_seeds(k);
    }
    if let Some(x) = common.tol_scale {
        cfg.tol_scale = x;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Hypothesis => 2,
        ErrorClass::Solver => 3,
        ErrorClass::Inconsistency => 4,
    }
}

fn execute(command: Command) -> homog_core::Result<u8> {
    let (name, common, from) = match command {
        Command::GenEnv(c) => ("gen-env", c, None),
        Command::Metric(c) => ("metric", c, None),
        Command::Shape(c) => ("shape", c, None),
        Command::Effective(c) => ("effective", c, None),
        Command::Macro(c) => ("macro", c, None),
        Command::Verify(c) => ("verify", c, None),
        Command::Report { common, from } => ("report", common, Some(from)),
    };
    let cfg = load(&common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| commands::dispatch(name, cfg, &common.out, from.as_deref()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("homog: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
