mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Flags, RunConfig};

/// Rating transition estimation from censored rating histories.
#[derive(Parser)]
#[command(name = "ratemig", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a generator and transition matrix from an event file.
    Estimate,
    /// Estimate at each of several dates.
    Roll,
    /// Cumulative default and downgrade curves with WARF scores.
    Curves,
    /// Aggregate a notched generator to letter grades.
    Coarsen,
    /// Simulate issuer histories from a generator.
    Simulate,
    /// Check an event file or matrix without writing anything.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::load(&cli.flags).and_then(|config| match cli.command {
        Command::Estimate => commands::estimate_cmd(config, &cli.flags),
        Command::Roll => commands::roll_cmd(config, &cli.flags),
        Command::Curves => commands::curves_cmd(config, &cli.flags),
        Command::Coarsen => commands::coarsen_cmd(config, &cli.flags),
        Command::Simulate => commands::simulate_cmd(config, &cli.flags),
        Command::Validate => commands::validate_cmd(config),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ratemig: {e}");
            e.exit_code()
        }
    }
}
