//! Batch front-end: ingest, crop, loss evaluation, metrics, the scaling
//! experiment and the toy diffusion demo.
//!
//! Each command reads the job configuration (defaults, then `--config`,
//! then flags), validates it, does its work on a worker pool of
//! `--parallelism` threads and writes its artifacts serially, so outputs
//! are a function of inputs, configuration and seed alone.

pub mod cmd;
pub mod config;
pub mod io;
pub mod outcome;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::JobConfig;
use outcome::{warning_line, Failure, Outcome, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "xtal", version, about = "Molecular crystal cropping, metrics and scaling checks")]
pub struct Cli {
    /// Job configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Root seed for every random stream of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "xtal-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and curate CIF (or canonical JSON) files into a corpus.
    Ingest(cmd::ingest::IngestArgs),
    /// Cut crops from corpus crystals.
    Crop(cmd::crop::CropArgs),
    /// Score predicted blocks against reference crystals.
    Metrics(cmd::metrics::MetricsArgs),
    /// Composite structure loss between two blocks.
    Losses(cmd::losses::LossesArgs),
    /// Boundary-loss scaling sweep on a synthetic lattice.
    Scaling(cmd::scaling::ScalingArgs),
    /// Reverse-time sampling of a Gaussian mixture.
    Diffuse(cmd::diffuse::DiffuseArgs),
}

fn effective_config(cli: &Cli) -> Result<JobConfig, Failure> {
    let mut cfg = JobConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<Outcome, Failure> {
    let mut cfg = effective_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let out = cli.out;
    pool.install(|| match cli.command {
        Command::Ingest(a) => cmd::ingest::run(&a, &mut cfg, &out),
        Command::Crop(a) => cmd::crop::run(&a, &mut cfg, &out),
        Command::Metrics(a) => cmd::metrics::run(&a, &mut cfg, &out),
        Command::Losses(a) => cmd::losses::run(&a, &mut cfg, &out),
        Command::Scaling(a) => cmd::scaling::run(&a, &mut cfg, &out),
        Command::Diffuse(a) => cmd::diffuse::run(&a, &mut cfg, &out),
    })
}

/// Runs one invocation and returns its exit status. Diagnostics go to
/// stderr as one JSON object per line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprintln!("{}", Failure::Usage(e.to_string().trim_end().to_string()).diagnostic());
            return EXIT_USAGE;
        }
    };
    match dispatch(cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("{}", warning_line(w));
            }
            outcome.code()
        }
        Err(f) => {
            eprintln!("{}", f.diagnostic());
            f.code()
        }
    }
}
