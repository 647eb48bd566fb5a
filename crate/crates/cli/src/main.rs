//! Command-line front end: spectrum sweeps, protocol runs, cooling limits and
//! engine cross-validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatpump::config::RunConfig;
use heatpump::ErrorKind;

mod cycle;
mod limit;
mod output;
mod spectrum;
mod validate;

#[derive(Parser)]
#[command(name = "heatpump", version, about = "Polariton heat-pump cooling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Polariton frequencies and phonon overlap over a detuning range.
    Spectrum,
    /// Run the cooling protocol and write the trajectory.
    Cycle,
    /// Asymptotic target occupation from the cycle map.
    Limit,
    /// Run the protocol on both engines and compare.
    Validate,
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON run configuration; `cycle` accepts several.
    #[arg(long, global = true)]
    pub config: Vec<PathBuf>,
    /// Output file (a directory when `cycle` gets several configs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Propagation engine, overriding the config.
    #[arg(long, global = true, value_parser = ["gaussian", "fock"])]
    pub engine: Option<String>,
    /// Concurrent runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Gaussian integrator tolerance, overriding the config.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug)]
pub enum Failure {
    Core(heatpump::Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
    /// Cross-validation found the engines in disagreement.
    Rejected(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Physics => 3,
                ErrorKind::Numerical => 4,
            },
            Failure::Io(..) | Failure::Usage(_) => 2,
            Failure::Rejected(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "{}: {e}", path.display()),
            Failure::Usage(msg) | Failure::Rejected(msg) => f.write_str(msg),
        }
    }
}

impl From<heatpump::Error> for Failure {
    fn from(e: heatpump::Error) -> Self {
        Failure::Core(e)
    }
}

/// Read, override and validate one config.
pub fn load_config(path: &Path, common: &Common) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))?;
    let mut config = RunConfig::from_json(&text)
        .map_err(|e| Failure::Core(e.context(path.display().to_string())))?;
    if let Some(tol) = common.tol {
        config.integrator.tol = tol;
    }
    if let Some(engine) = &common.engine {
        config.engine = engine.clone();
    }
    config
        .validate()
        .map_err(|e| Failure::Core(e.context(path.display().to_string())))?;
    Ok(config)
}

pub fn single_config(common: &Common, command: &str) -> Result<RunConfig, Failure> {
    match common.config.as_slice() {
        [path] => load_config(path, common),
        [] => Err(Failure::Usage(format!("{command}: --config is required"))),
        _ => Err(Failure::Usage(format!("{command} takes a single --config"))),
    }
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))
}

/// Write `text` to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => output::write_atomic(p, text).map_err(|e| Failure::Io(p.to_path_buf(), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum => spectrum::run(&cli.common),
        Command::Cycle => cycle::run(&cli.common),
        Command::Limit => limit::run(&cli.common),
        Command::Validate => validate::run(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
