//! `hartree-lab`: ground states and identity checks for pseudo-relativistic
//! Hartree energies.
//!
//! Exit codes: 0 success, 1 invalid input, 2 collapse, 3 no convergence,
//! 4 a checked identity or scan contract failed.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hartree_lab::HartreeError;

use crate::commands::{cmd_scan, cmd_solve, cmd_verify, Scan};
use crate::config::{Overrides, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_COLLAPSE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_CONTRACT: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lab(#[from] HartreeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lab(HartreeError::Collapse { .. }) => EXIT_COLLAPSE,
            _ => EXIT_INVALID,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hartree-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the energy of one family and write the state.
    Solve,
    /// Check the identities a ground state satisfies.
    Verify,
    /// Parameter sweeps.
    Scan {
        #[command(subcommand)]
        which: Scan,
    },
}

/// Cap the worker pool from `HARTREE_LAB_THREADS`.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HARTREE_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HARTREE_LAB_THREADS={raw:?} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    {
        let available = std::thread::available_parallelism().map_or(n, |a| a.get());
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.min(available))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    configure_threads()?;
    let cfg = RunConfig::resolve(&cli.flags)?;
    match &cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::Scan { which } => cmd_scan(*which, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
