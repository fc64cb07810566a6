//! `fopt` — a command-line lab for Fisher-preconditioned optimizers.
//!
//! Exit codes: 0 success, 1 a requested check failed, 2 configuration
//! error (bad flags, bad settings file, invalid hyperparameters), 3
//! runtime abort (divergence, I/O failure).

mod commands;
mod settings;
mod trace;
mod workload;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "fopt",
    version,
    about = "Run, sweep, and dissect Fisher-preconditioned optimizers on toy objectives"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one optimizer on one objective; writes trace.csv and
    /// summary.json, prints the summary
    Run(commands::run::RunArgs),
    /// Run one hyperparameter axis over several values in parallel and
    /// rank them
    Sweep(commands::sweep::SweepArgs),
    /// Track the running minimum gradient RMS at checkpoints and fit its
    /// decay constant
    Converge(commands::converge::ConvergeArgs),
    /// Empirical Fisher diagnostics at the initial point
    Fimlab(commands::fimlab::FimlabArgs),
}

/// Why a subcommand did not succeed, ordered by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1: the run finished but a requested check did not hold.
    CheckFailed(String),
    /// Exit 2: the request itself is unusable.
    Config(String),
    /// Exit 3: the run started and then aborted.
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(args) => commands::run::exec(args),
        Cmd::Sweep(args) => commands::sweep::exec(args),
        Cmd::Converge(args) => commands::converge::exec(args),
        Cmd::Fimlab(args) => commands::fimlab::exec(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
