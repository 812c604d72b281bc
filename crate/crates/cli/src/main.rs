//! `thresh-forge` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thresh_forge::{Error, SelectRule, StageOrder};

/// Environment variable capping worker threads.
const THREADS_VAR: &str = "THRESH_FORGE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "thresh-forge",
    version,
    about = "Global thresholding and cluster-then-threshold binarization"
)]
struct Cli {
    /// Leave per-stage timings out of reports.
    #[arg(long, global = true)]
    no_timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classic Otsu binarization.
    Otsu {
        input: PathBuf,
        /// Output mask (PGM, or PNG by extension).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Binarize with the classic or improved pipeline.
    Binarize(BinarizeArgs),
    /// Gaussian smoothing.
    Blur {
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the normalized 1-D kernel as a JSON array.
        #[arg(long)]
        dump_kernel: bool,
    },
    /// Cluster pixel intensities.
    Kmeans {
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Append normalized x/y to each pixel's features.
        #[arg(long)]
        spatial: bool,
        /// Seeded random initialization; evenly spaced distinct intensities otherwise.
        #[arg(long)]
        seed: Option<u64>,
        /// Per-pixel cluster index as a gray image.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic image and its ground truth.
    Synth {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_out: PathBuf,
    },
    /// Compare classic and improved binarization over seeds 1..=N.
    Compare {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check the ring axioms of 8-bit wrapping arithmetic.
    Ringcheck {
        #[arg(long, conflicts_with = "sample")]
        exhaustive: bool,
        /// Number of random tuples per axiom.
        #[arg(long, requires = "seed")]
        sample: Option<u64>,
        #[arg(long, requires = "sample")]
        seed: Option<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Classic,
    Improved,
}

#[derive(Debug, Args)]
struct BinarizeArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Improved)]
    method: MethodArg,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// brightest, largest or index:N
    #[arg(long, default_value = "brightest")]
    select: SelectRule,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// cluster-first or smooth-first
    #[arg(long, default_value = "cluster-first")]
    order: StageOrder,
    #[arg(long)]
    spatial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShapeArg {
    Disk,
    TriLobe,
}

#[derive(Debug, Clone, Args)]
struct SceneArgs {
    #[arg(long, value_enum, default_value_t = ShapeArg::Disk)]
    shape: ShapeArg,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 180)]
    fg: u8,
    #[arg(long, default_value_t = 60)]
    bg: u8,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_degenerate_input() {
        4
    } else if err.is_input_error() {
        3
    } else {
        2
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("thresh-forge: {msg}");
        return ExitCode::from(2);
    }
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("thresh-forge: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
