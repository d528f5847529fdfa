//! `quakescore`: batch evaluation of gridded expected-count earthquake forecasts.
//!
//! Exit codes: 0 success, 2 usage, 3 data or validation error, 4 numerical
//! degeneracy (zero or nonpositive variance, violated band bound).

mod commands;
mod config;
mod inputs;
mod output;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Command, RunArgs, RunConfig};
use crate::output::Output;

/// Problems with the invocation itself: flags, config file, missing files.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(
    name = "quakescore",
    version,
    about = "Evaluate gridded expected-count earthquake forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Total score, number score and daily score series per model.
    Score(RunArgs),
    /// Logarithmic Murphy curves, dominance bar and per-model integrals.
    Murphy(RunArgs),
    /// Pairwise Diebold-Mariano tests.
    Dmtest(RunArgs),
    /// Pairwise CSEP T-tests with information gains.
    Ttest(RunArgs),
    /// Reliability curve, consistency band and score decomposition per model.
    Reliability(RunArgs),
    /// MCB-DSC diagram data.
    Decompose(RunArgs),
    /// Mixture null experiment: p-values and a uniformity summary.
    Simulate(RunArgs),
    /// Per-cell mean score difference between two models.
    SpatialDiff(RunArgs),
}

impl Cmd {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Cmd::Score(a) => (Command::Score, a),
            Cmd::Murphy(a) => (Command::Murphy, a),
            Cmd::Dmtest(a) => (Command::Dmtest, a),
            Cmd::Ttest(a) => (Command::Ttest, a),
            Cmd::Reliability(a) => (Command::Reliability, a),
            Cmd::Decompose(a) => (Command::Decompose, a),
            Cmd::Simulate(a) => (Command::Simulate, a),
            Cmd::SpatialDiff(a) => (Command::SpatialDiff, a),
        }
    }
}

fn configure_threads() -> Result<(), Usage> {
    let Ok(v) = std::env::var("QUAKESCORE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Usage(format!("QUAKESCORE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Usage(e.to_string()))
}

fn run(command: Command, args: RunArgs) -> anyhow::Result<()> {
    configure_threads()?;
    let config = RunConfig::resolve(command, args)?;
    let mut out = Output::create(&config.out)?;
    out.write("config.txt", &config.echo())?;
    commands::run(&config, &mut out)?;
    for p in out.written() {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<quakescore::Error>() {
            return if e.is_numerical() { 4 } else { 3 };
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (command, args) = cli.command.split();
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
