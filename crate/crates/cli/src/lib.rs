//! `ugvq` command-line runner.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 runtime failure.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod events;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, configuration or input data.
    Usage,
    /// The inputs were fine but the work failed.
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Runtime => EXIT_RUNTIME,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an error with the exit code it should produce.
pub trait Classify<T> {
    fn usage(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError { kind: ErrorKind::Usage, error: e.into() })
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError { kind: ErrorKind::Runtime, error: e.into() })
    }
}

pub fn usage_error(msg: impl fmt::Display) -> CliError {
    CliError { kind: ErrorKind::Usage, error: anyhow::anyhow!("{msg}") }
}

#[derive(Debug, Parser)]
#[command(name = "ugvq", version, about = "Quality assessment for AI-generated video")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for splits, initialisation and shuffling. Required by `train` and the trial protocol.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Configuration override, e.g. `--set train.lr=1e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen raw ratings and compute per-dimension MOS.
    ProcessRatings(commands::ratings::RatingsArgs),
    /// Train the fusion model on one prompt-disjoint split.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint, a score file, or run the multi-trial protocol.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Correlate zero-shot metric adapters with MOS.
    Benchmark(commands::benchmark::BenchmarkArgs),
    /// Consolidate reports and plot MOS distributions.
    Report(commands::report::ReportArgs),
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
