//! `mvswap`: estimate, price, simulate, calibrate and report on
//! multivariate variance swaps from the command line.

mod commands;
mod failure;
mod files;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "mvswap",
    version,
    about = "Multivariate variance swaps via the generalized variance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Realized generalized variance, correlation and summary statistics from closing prices.
    Estimate(commands::estimate::Args),
    /// Closed-form swap price for a model and a contract.
    Price(commands::price::Args),
    /// Monte Carlo estimate of the expected realized generalized variance.
    Simulate(commands::simulate::Args),
    /// Fit Heston or BNS parameters to a realized-variance series.
    Calibrate(commands::calibrate::Args),
    /// Fitted-versus-realized chart and error metrics for one or two fits.
    Report(commands::report::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate(a) => commands::estimate::run(a),
        Command::Price(a) => commands::price::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Calibrate(a) => commands::calibrate::run(a),
        Command::Report(a) => commands::report::run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
