//! Command-line driver. Each command recomputes the stages it depends on
//! and writes its artifacts under the output directory.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_heteroclinic, cmd_profile, cmd_spectrum, cmd_validate, cmd_verify, Outcome};
pub use config::{Pipeline, RunConfig};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "wavefront", version, about = "Positive travelling wave fronts for delayed reaction-diffusion systems")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Run configuration (model definition plus `pipeline` section).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `pipeline.out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated speeds; overrides `pipeline.speeds`.
    #[arg(long, value_delimiter = ',')]
    pub speeds: Option<Vec<f64>>,
    /// Seed of the randomized evidence checks; overrides `pipeline.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dominant characteristic root and its continuation to each speed.
    Spectrum(Common),
    /// Heteroclinic connection of the diffusion-free system.
    Heteroclinic(Common),
    /// Wave profiles for every requested speed.
    Profile(Common),
    /// PDE simulation seeded with a computed profile.
    Validate(Common),
    /// Evidence for the standing hypotheses on the model.
    Verify(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Spectrum(c) | Command::Heteroclinic(c) | Command::Profile(c) | Command::Validate(c) | Command::Verify(c) => c,
        }
    }
}

/// Exit code for an error that aborted a command.
pub fn error_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Cfl { .. } | Error::InvalidModel(_) | Error::InvalidKernel(_) | Error::DimensionMismatch { .. } => {
            EXIT_CONFIG
        }
        Error::Hypothesis(_) | Error::NoRealRoot { .. } | Error::DominanceFailed { .. } | Error::NotSimple { .. } => EXIT_HYPOTHESIS,
        _ => EXIT_NUMERICAL,
    }
}

fn worker_count() -> Result<Option<usize>, Error> {
    match std::env::var("WAVEFRONT_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("WAVEFRONT_WORKERS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.pipeline.out = Some(out.clone());
    }
    if let Some(speeds) = &common.speeds {
        cfg.pipeline.speeds = speeds.clone();
    }
    if let Some(seed) = common.seed {
        cfg.pipeline.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<Outcome, Error> {
    match command {
        Command::Spectrum(_) => cmd_spectrum(cfg),
        Command::Heteroclinic(_) => cmd_heteroclinic(cfg),
        Command::Profile(_) => cmd_profile(cfg),
        Command::Validate(_) => cmd_validate(cfg),
        Command::Verify(_) => cmd_verify(cfg),
    }
}

/// Run a parsed command and return the process exit code.
pub fn run(args: &Args) -> i32 {
    let result = (|| {
        let cfg = load(args.command.common())?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = worker_count()? {
            pool = pool.num_threads(n);
        }
        let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| dispatch(&args.command, &cfg))
    })();
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            outcome.code
        }
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err, Error::NoCrossing { .. } | Error::WindowNotCovered(_)) {
                eprintln!("hint: the front left the domain; raise pipeline.pde.length");
            }
            error_code(&err)
        }
    }
}
