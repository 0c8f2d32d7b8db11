//! The `dproflog` command line.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "dproflog",
    version,
    about = "Learned clause selection for stochastic logic programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Replaces one configuration entry; may be repeated.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train by exact dynamic programming over the goal graph.
    DpTrain(RunArgs),
    /// Train from sampled derivations (PPO or masked REINFORCE).
    PgTrain(RunArgs),
    /// Evaluate a checkpoint and write a metrics report.
    Eval(RunArgs),
    /// Score one query and export its most probable proof.
    Prove(RunArgs),
    /// Cross-check exact probabilities and gradients against brute force.
    OracleCheck(RunArgs),
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::ResourceLimit { .. } => EXIT_RESOURCE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (args, f): (&RunArgs, fn(&RunConfig) -> crate::Result<()>) = match &cli.command {
        Command::DpTrain(a) => (a, commands::dp_train),
        Command::PgTrain(a) => (a, commands::pg_train),
        Command::Eval(a) => (a, commands::eval),
        Command::Prove(a) => (a, commands::prove),
        Command::OracleCheck(a) => (a, commands::oracle_check),
    };
    let result = RunConfig::load(&args.config, &args.overrides).and_then(|cfg| f(&cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
