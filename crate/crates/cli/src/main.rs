//! `aberrsim`: PSF synthesis, degradation, metric sweeps, dataset
//! generation, Otsu evaluation and classifier training from the shell.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{AberrationArgs, OpticsArgs, RunConfig, ScheduleKind, Split, TypeArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] aberrsim::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for I/O, 4 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        use aberrsim::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(E::Json(_)) => 3,
            CliError::Core(E::Numeric(_) | E::DegenerateHistogram | E::UndefinedCorrelation) => 4,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aberrsim",
    version,
    about = "Zernike-aberrated microscopy simulation toolkit"
)]
struct Cli {
    /// JSON run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a PSF float grid, PNG preview and JSON sidecar.
    Psf(PsfArgs),
    /// Write the radial MTF as CSV (and the |OTF| grid).
    Mtf(MtfArgs),
    /// Convolve one image with an aberrated PSF.
    Degrade(DegradeArgs),
    /// PSNR, SSIM and Pearson r across the amplitude schedule of one type.
    SweepMetrics(SweepArgs),
    /// Render a labeled PSF dataset and its manifest.
    GenDataset(GenArgs),
    /// Train the three-head classifier on a rendered manifest.
    Train(TrainArgs),
    /// Confusion matrices, accuracy and macro precision of a checkpoint.
    Eval(EvalArgs),
    /// Otsu segmentation scored by AP50, AP75 and COCO AP.
    OtsuEval(OtsuEvalArgs),
    /// Synthetic cell-like blobs with truth masks and degraded copies.
    SynthBlobs(SynthArgs),
}

#[derive(Debug, Args)]
struct PsfArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    #[command(flatten)]
    aberration: AberrationArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File stem inside the output directory.
    #[arg(long, default_value = "psf")]
    name: String,
}

#[derive(Debug, Args)]
struct MtfArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    #[command(flatten)]
    aberration: AberrationArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write mtf.svg with the diffraction-limited reference.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct DegradeArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    #[command(flatten)]
    aberration: AberrationArgs,
    /// Source image (PNG or raw float).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Output image; `.f32` writes a raw float grid, anything else PNG.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    /// Source image.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Aberration family to sweep.
    #[arg(long = "type", value_enum)]
    kind: TypeArg,
    /// Prepend an amplitude-0 self-comparison row.
    #[arg(long)]
    with_zero: bool,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the curves as SVG next to the CSV.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    /// Which protocol to generate.
    #[arg(long, value_enum, conflicts_with_all = ["plcm_train", "plcm_test"])]
    schedule: Option<ScheduleKind>,
    /// Shorthand for --schedule plcm-train.
    #[arg(long, conflicts_with = "plcm_test")]
    plcm_train: bool,
    /// Shorthand for --schedule plcm-test.
    #[arg(long)]
    plcm_test: bool,
    /// Base seed of every record seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Mixed records per order range.
    #[arg(long)]
    mixed_per_range: Option<usize>,
    /// Single records per type (heldout).
    #[arg(long)]
    singles_per_type: Option<usize>,
    /// Copies per type and level (jittered).
    #[arg(long)]
    jitters: Option<usize>,
    /// How a pair amplitude splits across its two indices (plcm-train).
    #[arg(long, value_enum)]
    split: Option<Split>,
    /// Source images to degrade, one per record cycling by name.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Rendered manifest (record paths are relative to it).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output checkpoint; the loss log goes to `<stem>.loss.csv`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Use MSE on softmax outputs instead of cross-entropy.
    #[arg(long)]
    mse: bool,
    /// Seed for initialization and shuffling.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the loss curve as SVG.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Rendered test manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory for the confusion matrices.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OtsuEvalArgs {
    /// JSON Lines of {image, aberration, amplitude, truth}.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Truth index mapping names to mask PNGs.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write AP against amplitude as SVG next to the CSV.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of blobs.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Families to degrade with; defaults to all four.
    #[arg(long = "type", value_enum, value_delimiter = ',')]
    kinds: Vec<TypeArg>,
    /// Amplitudes in micrometers; defaults to the 8-level schedule.
    #[arg(long, value_delimiter = ',')]
    amps: Vec<f64>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ABERRSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "ABERRSIM_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Psf(a) => commands::psf(&cfg, a),
        Command::Mtf(a) => commands::mtf(&cfg, a),
        Command::Degrade(a) => commands::degrade(&cfg, a),
        Command::SweepMetrics(a) => commands::sweep_metrics(&cfg, a),
        Command::GenDataset(a) => commands::gen_dataset(&cfg, a),
        Command::Train(a) => commands::train(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::OtsuEval(a) => commands::otsu_eval(&cfg, a),
        Command::SynthBlobs(a) => commands::synth_blobs(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
