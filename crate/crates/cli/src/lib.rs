//! Command-line front end: dataset ingestion, configuration and the subcommands.
//!
//! Exit codes: 0 success, 1 input error, 2 guarantee missed, 3 work cap exceeded.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod mixture_file;
pub mod output;
pub mod svg;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "fairpost", version, about = "Fair post-processing of regression scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the constrained solver and write the mixture.
    Solve(commands::solve::SolveArgs),
    /// Solve over a grid of γ values and write the Pareto table.
    Sweep(commands::sweep::SweepArgs),
    /// Measure joint multicalibration of the dataset scores.
    Audit(commands::audit::AuditArgs),
    /// Patch the dataset scores until they are multicalibrated.
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Generate a synthetic instance.
    Synth(commands::synth::SynthArgs),
    /// Evaluate a mixture and/or the exact optimum.
    Eval(commands::eval::EvalArgs),
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Solve(a) => commands::solve::run(a),
        Command::Sweep(a) => commands::sweep::run(a),
        Command::Audit(a) => commands::audit::run(a),
        Command::Calibrate(a) => commands::calibrate::run(a),
        Command::Synth(a) => commands::synth::run(a),
        Command::Eval(a) => commands::eval::run(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fairpost: {e}");
            e.exit_code()
        }
    }
}
