//! Experiment runner.
//!
//! Exit codes: 0 success, 1 a check command's criterion failed, 2 invalid
//! config, 3 runtime failure, 4 ergodicity failure, 5 statistics failure.

mod commands;
mod config;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use markov_mirror::Error;

use crate::commands::Env;
use crate::config::{Config, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("cannot write {path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(..) | CliError::Runtime(_) => 3,
            CliError::Lib(e) => match e {
                Error::Config(_) | Error::Input(_) | Error::UnsupportedMetric(_) => 2,
                Error::Domain(_) | Error::Solver(_) => 3,
                Error::Ergodicity(_) | Error::Diagnostics(_) => 4,
                Error::Statistics(_) => 5,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "markov-mirror", version, about = "Mirror descent and mirror-prox under Markovian noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` lines), or a CSV written by this tool.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated seeds; replaces `run.seeds`.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Worker threads (seeds run in parallel). `MM_DETERMINISTIC=1` forces 1.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Record every `stride`-th iteration; replaces `run.stride`.
    #[arg(long, global = true)]
    stride: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// One run per seed, plus a summary of the final gaps.
    Run,
    /// Runs over `sweep.grid` and fits the log-log rate.
    Sweep,
    /// Stationary law, mixing time and TV curve of the configured chain.
    DiagnoseChain,
    /// Averaged-noise scaling check.
    CheckLemma1,
    /// Multilevel estimator check: unbiasedness, bias decay, variance.
    CheckLemma2,
}

fn load(cli: &Cli) -> Result<Config, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = Config::parse(&text)?;
    if let Some(seeds) = &cli.seed {
        if seeds.is_empty() {
            return Err(ConfigError::global("--seed needs at least one seed").into());
        }
        cfg.seeds = seeds.clone();
    }
    if let Some(stride) = cli.stride {
        if stride == 0 {
            return Err(ConfigError::global("--stride must be positive").into());
        }
        cfg.stride = stride;
    }
    Ok(cfg)
}

fn jobs(cli: &Cli) -> usize {
    if std::env::var("MM_DETERMINISTIC").is_ok_and(|v| v == "1") {
        return 1;
    }
    cli.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let env = Env { jobs: jobs(cli), out: cli.out.clone() };
    match cli.command {
        Command::Run => commands::cmd_run(&cfg, &env),
        Command::Sweep => commands::cmd_sweep(&cfg, &env),
        Command::DiagnoseChain => commands::cmd_diagnose_chain(&cfg),
        Command::CheckLemma1 => commands::cmd_check_lemma1(&cfg, &env),
        Command::CheckLemma2 => commands::cmd_check_lemma2(&cfg, &env),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("markov-mirror: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
