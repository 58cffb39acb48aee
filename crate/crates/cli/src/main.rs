//! Command-line front end: configuration loading, subcommand dispatch, and
//! deterministic run orchestration.

mod commands;
mod config;
mod io;
mod selftest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "weakmfg",
    about = "Weak KAM objects and quasi-stationary mean field games on the torus",
    version
)]
struct Cli {
    /// Cap on worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Configuration file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed override for transport sampling metadata.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the model structure, constants and initial measure.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Critical value of the ergodic equation for one measure.
    CriticalValue {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// One of: uniform, dirac:X, random:SEED, file:PATH.
        #[arg(long, default_value = "uniform")]
        measure: String,
    },
    /// Barrier field based at a point, with its co-state.
    Barrier {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "uniform")]
        measure: String,
        /// Base point on the torus.
        #[arg(long, default_value_t = 0.0)]
        base: f64,
    },
    /// Barrier diagonal scan and member set.
    Aubry {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "uniform")]
        measure: String,
    },
    /// Full fixed-point solve with verification and export.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Built-in oracle suite (fast, n = 64).
    Selftest,
}

fn load(cfg: &ConfigArgs) -> Result<config::ResolvedConfig, i32> {
    config::load(&cfg.config, cfg.out.as_deref(), cfg.seed).map_err(|e| {
        eprintln!("{e}");
        commands::EXIT_CONFIG
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("cannot size the thread pool: {e}");
        }
    }
    let code = match &cli.command {
        Command::Validate { cfg } => match load(cfg) {
            Ok(resolved) => commands::cmd_validate(&resolved),
            Err(code) => code,
        },
        Command::CriticalValue { cfg, measure } => match load(cfg) {
            Ok(resolved) => commands::cmd_critical_value(&resolved, measure),
            Err(code) => code,
        },
        Command::Barrier { cfg, measure, base } => match load(cfg) {
            Ok(resolved) => commands::cmd_barrier(&resolved, measure, *base),
            Err(code) => code,
        },
        Command::Aubry { cfg, measure } => match load(cfg) {
            Ok(resolved) => commands::cmd_aubry(&resolved, measure),
            Err(code) => code,
        },
        Command::Solve { cfg } => match load(cfg) {
            Ok(resolved) => commands::cmd_solve(&resolved),
            Err(code) => code,
        },
        Command::Selftest => {
            let failures = selftest::run();
            if failures.is_empty() {
                println!("all checks passed");
                commands::EXIT_OK
            } else {
                eprintln!(
                    "failed checks: {}",
                    failures
                        .iter()
                        .map(|(n, _)| n.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                commands::EXIT_SELFTEST
            }
        }
    };
    ExitCode::from(code as u8)
}
