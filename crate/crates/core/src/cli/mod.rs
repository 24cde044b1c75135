//! Command-line front end.
//!
//! ```text
//! mean-reflect <command> [--config FILE] [--scenario NAME] [--seed U64] [--particles N]
//!              [--steps N] [--horizon Q] [--tol X] [--out DIR] [--threads N]
//! ```
//!
//! Exit codes: 0 on success, 1 when a constraint or verification check fails (or a
//! solver reports a numerical failure), 2 on usage, configuration or I/O errors.

pub mod config;
pub mod run;
pub mod scenarios;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, resolve, Command, Overrides, RunConfig};
pub use run::{execute, produce, run_id, Outcome, Produced};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "mean-reflect", version, about = "Skorokhod maps and SDEs with mean reflection between two barriers")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shipped scenario to start from; keys in the config file override it.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Steps per unit time.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Residual tolerance of the barrier transform.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Directory receiving `<run-id>/`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            scenario: self.scenario.clone(),
            seed: self.seed,
            particles: self.particles,
            steps: self.steps,
            horizon: self.horizon,
            tol: self.tol,
            out: self.out.clone(),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConstraintViolation { .. } | Error::NumericalFailure { .. } => 1,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) => 2,
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, Error> {
    match threads {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("cannot build a pool of {n} threads: {e}"))),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, Error> {
    Ok(f())
}

/// Parses `args` (including the program name), runs, prints a summary and returns
/// the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match parse_config(cli.command, cli.config.as_deref(), &cli.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match with_threads(cli.threads, || execute(&cfg)).and_then(|r| r) {
        Ok(outcome) => {
            println!("{}", outcome.run_dir.display());
            println!("{}", outcome.summary);
            if outcome.passed { 0 } else { 1 }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
