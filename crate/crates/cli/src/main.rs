//! `kinopt`: runs, scaling experiments, benchmark sweeps and diagnostics.
//!
//! Exit codes: 0 success, 1 experiment failure, 2 usage error, 3 numeric
//! divergence.

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Divergence(String),
    Failed(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Divergence(m) => write!(f, "diverged: {m}"),
            CliError::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

impl From<kinopt::Error> for CliError {
    fn from(e: kinopt::Error) -> Self {
        match e {
            kinopt::Error::Divergence { .. } | kinopt::Error::Numeric(_) => CliError::Divergence(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "kinopt", version, about = "Particle optimizers and their scaling limits")]
struct Cli {
    /// Worker threads (1 is the reproducibility reference).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed; beats the configuration file and KINOPT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "kinopt-out")]
    pub out: PathBuf,
    /// `key=value` configuration override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One run; writes trace.csv and summary.json.
    Run(Common),
    /// A scaling experiment; writes report.json and report.csv.
    Scale(Common),
    /// Success rates over repeated runs; writes bench.csv.
    Bench(Common),
    /// Laplace-principle or growth-condition diagnostics; writes diag.csv.
    Diag(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run(c) => commands::cmd_run(c),
        Command::Scale(c) => commands::cmd_scale(c),
        Command::Bench(c) => commands::cmd_bench(c),
        Command::Diag(c) => commands::cmd_diag(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
