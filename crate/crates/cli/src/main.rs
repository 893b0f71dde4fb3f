//! Scenario runner for the retirement/consumption/portfolio solver.
#![allow(clippy::excessive_precision)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::SweepParam;

#[derive(Parser)]
#[command(name = "duallife", version, about = "Optimal retirement, consumption and portfolio choice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Oracle {
    Crra,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write summary.txt, solution.csv and policy_table.csv.
    Solve {
        config: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the verification checks and write verify_report.txt.
    Verify {
        config: PathBuf,
        /// Compare against closed forms.
        #[arg(long, value_enum)]
        oracle: Option<Oracle>,
        /// Add the Monte Carlo checks.
        #[arg(long)]
        simulate: bool,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-solve over a list of values for one parameter and write sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the bad-config exit code.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Solve { config, out } => commands::cmd_solve(config, out),
        Command::Verify {
            config,
            oracle,
            simulate,
            out,
        } => commands::cmd_verify(config, oracle.is_some(), *simulate, out),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => commands::cmd_sweep(config, *param, values, out),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
