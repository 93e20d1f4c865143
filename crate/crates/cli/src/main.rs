//! `hhfuse` command-line driver.
//!
//! Exit codes: 0 on success, 1 for runtime or numerical failures, 2 for
//! usage and configuration errors.

mod bench;
mod cortex;
mod crypt;
mod manifest;
mod settings;
mod simulate;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::Context;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] hhfuse::Error),

    /// A self-check (gradient tolerance, fused/naive agreement, memory bound)
    /// did not hold.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(e) if e.is_usage() => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Engine(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hhfuse", version, about = "Hodgkin-Huxley simulation, training, cortex and cipher experiments")]
struct Cli {
    /// Global seed. Falls back to the config file, then HHENGINE_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel modes.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point-neuron or morphology simulation, optionally swept over the drive.
    Simulate(simulate::Args),
    /// Teacher-student fitting with resumable checkpoints.
    Train(train::Args),
    /// Cortical microcircuit run.
    Cortex(cortex::Args),
    /// HH filter-bank cipher.
    #[command(subcommand)]
    Crypt(crypt::Command),
    /// Engine benchmarks and self-checks.
    #[command(subcommand)]
    Bench(bench::Command),
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.threads == 0 {
        return Err(hhfuse::Error::Usage("--threads must be at least 1".into()).into());
    }
    let ctx = Context {
        seed_flag: cli.seed,
        threads: cli.threads,
        argv: std::env::args().collect(),
    };
    match cli.command {
        Command::Simulate(args) => simulate::run(&ctx, &args),
        Command::Train(args) => train::run(&ctx, &args),
        Command::Cortex(args) => cortex::run(&ctx, &args),
        Command::Crypt(cmd) => crypt::run(&ctx, &cmd),
        Command::Bench(cmd) => bench::run(&ctx, &cmd),
    }
}

/// Piping into `head` and similar should end the process quietly rather
/// than panic inside `println!`.
#[cfg(unix)]
fn restore_sigpipe() {
    // SAFETY: called once at startup before any other thread exists.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn restore_sigpipe() {}

fn main() -> ExitCode {
    restore_sigpipe();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hhfuse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
