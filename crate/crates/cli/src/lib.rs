//! `sar2rgb` command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;

pub use error::CliError;

/// Environment variable consulted for a seed when neither a flag nor the
/// configuration document provides one.
pub const SEED_ENV: &str = "SAR2RGB_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "sar2rgb",
    version,
    about = "SAR-to-optical translation pipeline: ingest, screen, filter, split, train, infer, eval, ensemble, package",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline configuration document (JSON); flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed [env: SAR2RGB_SEED, used when neither flag nor config sets one]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for tile-parallel commands (screen, infer)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Restrict training to fixed-order kernels for bit-exact reruns
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert external GeoTIFF rasters into tiles
    Ingest(commands::IngestArgs),
    /// Compute nodata and cloud ratios for every optical tile
    Screen(commands::ScreenArgs),
    /// Keep the pairs that pass a dataset preset
    Filter(commands::FilterArgs),
    /// Split a manifest into training and held-out parts
    Split(commands::SplitArgs),
    /// Train a generator (and discriminator, for adversarial losses)
    Train(commands::TrainArgs),
    /// Translate SAR tiles with a trained checkpoint
    Infer(commands::InferArgs),
    /// Score predictions against reference optical tiles
    Eval(commands::EvalArgs),
    /// Combine several prediction sets
    Ensemble(commands::EnsembleArgs),
    /// Write a submission directory with checksums
    Package(commands::PackageArgs),
    /// Generate the synthetic fixture corpus
    Synth(commands::SynthArgs),
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, r| writeln!(buf, "[{}] {}", r.level(), r.args()))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `argv` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
