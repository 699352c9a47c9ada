use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod commands;
mod output;

use args::{Cli, Command};

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Rejected before any work started.
    Config(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

pub fn internal_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Internal(e.into())
}

pub const WORKERS_ENV: &str = "SIGDETECT_WORKERS";
pub const OUT_ENV: &str = "SIGDETECT_OUT";

fn init_workers() -> CliResult<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_err(anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(internal_err)
}

fn run(cli: Cli) -> CliResult<()> {
    init_workers()?;
    match cli.command {
        Command::Trace(a) => commands::trace(a),
        Command::Corpus(a) => commands::corpus(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Curve(a) => commands::curve(a),
        Command::Early(a) => commands::early(a),
        Command::Features(a) => commands::features(a),
        Command::Xversion(a) => commands::xversion(a),
        Command::Overhead(a) => commands::overhead(a),
        Command::Delaylab(a) => commands::delaylab(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, err) = match &e {
                CliError::Config(err) => ("configuration error", err),
                CliError::Internal(err) => ("error", err),
            };
            eprintln!("sigdetect: {kind}: {err:#}");
            ExitCode::from(e.code())
        }
    }
}
