//! `convsim`: verification checks, Monte-Carlo experiments, standalone loss
//! minimization, and small-CNN training, all emitting CSV/JSON artifacts
//! with a reproducibility manifest.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit code for failed checks or runtime errors.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "convsim", version, about, max_term_width = 100)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonRunArgs {
    /// Configuration file (key=value or JSON, or a manifest to re-run).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named bundled configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Resolve and print the configuration without running.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomized checks of the correlation identities, the padded
    /// decomposition, analytic gradients, and the zero-loss certificate.
    Verify {
        /// Random trials for the identity and decomposition checks.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Smallest input length.
        #[arg(long, default_value_t = 8)]
        min_m: usize,
        /// Largest input length.
        #[arg(long, default_value_t = 64)]
        max_m: usize,
        /// Largest kernel length.
        #[arg(long, default_value_t = 16)]
        max_n: usize,
        /// Relative tolerance for the identity checks.
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
        /// Corrupt the identity right-hand side to confirm the harness
        /// catches a broken implementation.
        #[arg(long, hide = true)]
        break_rhs: bool,
    },
    /// Run a Monte-Carlo experiment and write summary + trace CSVs.
    Mc {
        #[command(flatten)]
        run: CommonRunArgs,
    },
    /// Train a CNN (baseline, iterative initialization, or regularization).
    Train {
        #[command(flatten)]
        run: CommonRunArgs,
        /// Directory with the binary image batches (or set CIFAR10_DIR).
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Resume from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Minimize the convolutional similarity of a described kernel bank and
    /// report before/after losses.
    Minimize {
        /// Number of kernels S.
        #[arg(long, default_value_t = 2)]
        kernels: usize,
        /// Input channels C.
        #[arg(long, default_value_t = 1)]
        channels: usize,
        /// Spatial size: N for 1-d kernels or HxW for 2-d.
        #[arg(long, default_value = "3")]
        size: String,
        /// Optimizer: adam or sgd.
        #[arg(long, default_value = "adam")]
        optimizer: String,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 300)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// List bundled configurations.
    Presets,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config files, invalid argument combinations.
    #[error("{0}")]
    Usage(String),
    /// A check ran and failed, or a runtime failure occurred.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_CHECK_FAILED,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    let result = match cli.command {
        Command::Verify {
            trials,
            min_m,
            max_m,
            max_n,
            tolerance,
            seed,
            out_dir,
            break_rhs,
        } => commands::verify::run(commands::verify::VerifyArgs {
            trials,
            min_m,
            max_m,
            max_n,
            tolerance,
            seed,
            out_dir,
            break_rhs,
        }),
        Command::Mc { run } => commands::mc::run(run),
        Command::Train {
            run,
            data_dir,
            resume,
        } => commands::train::run(run, data_dir, resume),
        Command::Minimize {
            kernels,
            channels,
            size,
            optimizer,
            lr,
            iters,
            seed,
            out_dir,
        } => commands::minimize::run(commands::minimize::MinimizeArgs {
            kernels,
            channels,
            size,
            optimizer,
            lr,
            iters,
            seed,
            out_dir,
        }),
        Command::Presets => {
            println!("monte-carlo presets:");
            for name in convsim_core::experiments::preset_names() {
                println!("  {name}");
            }
            println!("training presets:");
            for name in config::train_preset_names() {
                println!("  {name}");
            }
            Ok(())
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
