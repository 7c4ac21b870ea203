//! `alphapred`: seeded experiments and checks for predictive densities under
//! alpha-divergence loss.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 failed verification.

mod commands;
mod config;
mod error;
mod table;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use config::{Cli, RunConfig};
use error::CliError;

fn write_output(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("--out {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("stdout: {e}"))),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let outcome = commands::run(&cfg)?;
    write_output(&cfg, &outcome.table.render(&cfg))?;
    match outcome.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alphapred {}: {e}", cli.command.label());
            ExitCode::from(e.exit_code())
        }
    }
}
