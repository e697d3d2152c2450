mod args;
mod commands;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{load_config, Cli, Command};
use commands::Outcome;

const THREADS_VAR: &str = "CRIB_BSE_THREADS";

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_VAR}: expected a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    configure_threads()?;
    let config = cli.config.as_deref();
    match cli.command {
        Command::Sweep(a) => commands::sweep(a.merge(load_config(config)?)),
        Command::Validate(a) => commands::validate(a.merge(load_config(config)?)),
        Command::Simulate(a) => commands::simulate(a.merge(load_config(config)?)),
        Command::Estimate(a) => commands::estimate(a.merge(load_config(config)?)),
    }
}

/// Exit status: 0 on success, 1 when a validation suite fails, 2 on usage,
/// configuration or input errors.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
