//! `borps` command-line tool: fit ordinal quantile regressions, simulate
//! datasets, and rerun the simulation study.

mod error;
mod fit;
mod io;
mod reproduce;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "borps", version, about = "Bayesian ordinal quantile regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model to a CSV file at one or more quantiles.
    Fit(fit::FitArgs),
    /// Write a simulated dataset and its ground truth.
    Simulate(simulate::SimulateArgs),
    /// Rerun one of the simulation experiments and write its report.
    Reproduce(reproduce::ReproduceArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BORPS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::input(format!("BORPS_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::other(format!("could not start the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Fit(args) => fit::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Reproduce(args) => reproduce::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
