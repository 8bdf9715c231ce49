//! Command-line simulator for two defect oscillators coupled to a finite
//! harmonic chain: single runs, entanglement contour scans, spectral
//! characterization and isolated-frequency boundary scans.

mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn numerical(e: chainbath::Error) -> Self {
        match e {
            chainbath::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "chainbath",
    about = "Exact Gaussian dynamics of defect oscillators coupled to a harmonic chain",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `output` key).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for scans and time sampling (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Use the thermal equilibrium estimate instead of measuring the plateau
    /// from a full simulation (contour only).
    #[arg(long, global = true)]
    fast_steady: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Variance and negativity time series for one parameter set.
    Single,
    /// Logarithmic-negativity phases over a (r, temperature) grid.
    Contour,
    /// Dispersion, spectral density, friction kernel, isolated frequencies.
    Spectral,
    /// Largest isolated frequency over a (gamma, kappa) grid.
    Boundary,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure workers: {e}")))?;
    }
    // keep the dense solver sequential so output bytes do not depend on the
    // worker count; parallelism comes from the scan/sample loops
    chainbath::faer::set_global_parallelism(chainbath::faer::Par::Seq);

    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Io(format!("cannot read `{}`: {e}", config_path.display())))?;
    let config = RunConfig::parse(&text, cli.output.clone());
    let config = config?;

    match cli.command {
        Command::Single => tasks::run_single(&config),
        Command::Contour => tasks::run_contour(&config, cli.fast_steady),
        Command::Spectral => tasks::run_spectral(&config),
        Command::Boundary => tasks::run_boundary(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chainbath: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
