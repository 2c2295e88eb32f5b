//! Experiment driver for the lookahead policy-iteration library: validation
//! suites and the grid-world sweeps, emitting deterministic CSV artifacts.
//!
//! Exit codes: 0 on success, 1 when a checked property fails or a solver
//! gives up, 2 on configuration errors.

mod config;
mod contraction;
mod output;
mod sweep;
mod tightness;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{resolve, ExperimentConfig, ExperimentKind, Overrides, Resolved};

/// A failure with its exit code: configuration problems exit 2, failed
/// checks and solver errors exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Check(String),
}

#[derive(Parser)]
#[command(
    name = "lookahead",
    version,
    about = "Validation suites and experiments for multi-step lookahead policy iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config; built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the CSV output (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent cells; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Replace the seed list with 0..N.
    #[arg(long)]
    seed_count: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the worst-case chain's error ratios to their closed forms.
    Tightness {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check one-step gamma^h contraction on seeded random models.
    Contraction {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the schemes over an h-by-m grid of seeded grid worlds.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Noisy evaluations: uniform value noise, budget-limited runs.
        #[arg(long)]
        noisy: bool,
    },
    /// Run every library invariant suite and report per-suite pass counts.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Corrupt one fixture's transition row first (self-test hook).
        #[arg(long)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (kind, common, noisy, inject_fault) = match command {
        Command::Tightness { common } => (ExperimentKind::Tightness, common, false, false),
        Command::Contraction { common } => (ExperimentKind::Contraction, common, false, false),
        Command::Sweep { common, noisy } => (ExperimentKind::SweepNoiseless, common, noisy, false),
        Command::Verify { common, inject_fault } => {
            (ExperimentKind::Verify, common, false, inject_fault)
        }
    };
    let file = common.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let overrides = Overrides { out: common.out, seed_count: common.seed_count, noisy };
    let cfg = resolve(kind, file, &overrides)?;
    run_in_pool(common.jobs, kind, cfg, inject_fault)
}

fn run_in_pool(
    jobs: Option<usize>,
    kind: ExperimentKind,
    cfg: Resolved,
    inject_fault: bool,
) -> Result<(), CliError> {
    let body = || match kind {
        ExperimentKind::Tightness => tightness::cmd_tightness(&cfg),
        ExperimentKind::Contraction => contraction::cmd_contraction(&cfg),
        ExperimentKind::SweepNoiseless | ExperimentKind::SweepNoisy => sweep::cmd_sweep(&cfg),
        ExperimentKind::Verify => verify::cmd_verify(&cfg, inject_fault),
    };
    match jobs {
        None | Some(0) => body(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build a {n}-thread pool: {e}")))?
            .install(body),
    }
}
