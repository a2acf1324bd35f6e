//! Batch experiment driver.
//!
//! Every subcommand writes `<outdir>/<name>.csv` (plus `<name>_<part>.csv`
//! side tables) and `<name>.meta.json`. Exit status is 0 on success, 2 on
//! invalid input and 3 on numeric breakdown.

mod config;
mod output;
mod runs;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<warmstart::Error> for CliError {
    fn from(e: warmstart::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "warmstart",
    version,
    about = "Warm-started variational compression experiments"
)]
struct Cli {
    /// TOML experiment configuration; omitted sections keep the subcommand defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "WARMSTART_OUTDIR", default_value = "out")]
    outdir: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run the n = 10 reproductions and add n = 12 to the sweeps.
    #[arg(long, global = true, env = "WARMSTART_LONG_RUN")]
    long_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Variance and mean loss over hypercubes of growing half-width r.
    VarianceSweep,
    /// Variance at fixed r as the time step grows.
    VarianceVsDt,
    /// Evaluate every analytic bound for the `[bounds]` inputs.
    Bounds,
    /// Follow the adiabatic minimum and check the shift bound.
    AdiabaticTrack,
    /// Multistart minima search and 1D landscape cuts as dt grows.
    MinimaCut,
    /// Loss on the PCA plane of an optimizer trajectory.
    #[command(name = "landscape-2d")]
    Landscape2d,
    /// Directional gradient along an optimizer trajectory against random points.
    GradPath,
    /// Iterative compression of exp(-iHt)|psi0>.
    Compress,
    /// Imaginary-time variance and convexity bounds against sampling.
    IteSuite,
    /// Unitary-learning and QML loss equivalences.
    UnitarySuite,
    /// Small oracle checks on one and two qubits.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::VarianceSweep => "variance-sweep",
            Command::VarianceVsDt => "variance-vs-dt",
            Command::Bounds => "bounds",
            Command::AdiabaticTrack => "adiabatic-track",
            Command::MinimaCut => "minima-cut",
            Command::Landscape2d => "landscape-2d",
            Command::GradPath => "grad-path",
            Command::Compress => "compress",
            Command::IteSuite => "ite-suite",
            Command::UnitarySuite => "unitary-suite",
            Command::Selftest => "selftest",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(k) = cli.threads {
        warmstart::par::set_threads(k)?;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let ctx = runs::RunContext {
        cfg: &cfg,
        seed,
        long_run: cli.long_run,
    };
    let started = Instant::now();
    let report = match cli.command {
        Command::VarianceSweep => runs::variance_sweep(&ctx),
        Command::VarianceVsDt => runs::variance_vs_dt(&ctx),
        Command::Bounds => runs::bounds(&ctx),
        Command::AdiabaticTrack => runs::adiabatic_track(&ctx),
        Command::MinimaCut => runs::minima_cut(&ctx),
        Command::Landscape2d => runs::landscape_2d(&ctx),
        Command::GradPath => runs::grad_path(&ctx),
        Command::Compress => runs::compress(&ctx),
        Command::IteSuite => runs::ite_suite(&ctx),
        Command::UnitarySuite => runs::unitary_suite(&ctx),
        Command::Selftest => selftest::run(&ctx),
    }?;
    let meta = output::Meta {
        subcommand: cli.command.name(),
        seed,
        config_path: cli.config.as_deref(),
        config: &cfg,
        long_run: cli.long_run,
        threads: cli.threads,
        duration_s: started.elapsed().as_secs_f64(),
    };
    output::write(&cli.outdir, cli.command.name(), &report, &meta)?;
    if let Some(text) = &report.text {
        print!("{text}");
    }
    if let Some(failure) = &report.failure {
        return Err(CliError::Numeric(failure.clone()));
    }
    Ok(())
}
