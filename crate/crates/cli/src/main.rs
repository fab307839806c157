//! `socdist` command-line tool.

mod commands;
mod frames;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use socdist::io::{to_sorted_json, PipelineConfig};

/// Exit status: 0 success, 1 data error, 2 usage error.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl From<socdist::io::FormatError> for CliError {
    fn from(e: socdist::io::FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Human-readable text plus the machine-readable form printed with `--json`.
pub struct Outcome {
    pub message: String,
    pub json: serde_json::Value,
    /// Data error raised after all outputs were written.
    pub failure: Option<String>,
}

#[derive(Parser, Debug)]
#[command(name = "socdist", version, about = "Single-camera social distance monitoring")]
struct Cli {
    /// TOML pipeline configuration supplying default paths and thresholds.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Print machine-readable, key-sorted JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for per-frame processing.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the mobile-to-fixed camera pose from a planar board seen by both cameras.
    Calibrate(CalibrateArgs),
    /// Remap confident SLAM samples into fixed-camera control points.
    Init(InitArgs),
    /// Rescale relative depth and measure inter-personal distances per frame.
    Run(RunArgs),
    /// Measure distances with the ground-plane homography baseline.
    Baseline(BaselineArgs),
    /// Compare reports against reference depth.
    Evaluate(EvaluateArgs),
    /// Write a synthetic scene bundle with ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Board corners seen by the fixed camera (`X,Y,Z,u,v`).
    #[arg(long)]
    pub board_fixed: PathBuf,
    /// The same corners seen by the mobile camera, in the same order.
    #[arg(long)]
    pub board_mobile: PathBuf,
    /// Fixed-camera intrinsics JSON; defaults to `fixed_intrinsics` in the config.
    #[arg(long)]
    pub fixed_intrinsics: Option<PathBuf>,
    /// Mobile-camera intrinsics JSON; defaults to `mobile_intrinsics` in the config.
    #[arg(long)]
    pub mobile_intrinsics: Option<PathBuf>,
    /// Output pose JSON (mobile camera frame to fixed camera frame).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InitArgs {
    /// Raw SLAM samples (`u,v,depth_m,confidence`) in the mobile image.
    #[arg(long)]
    pub slam: PathBuf,
    /// Pose JSON written by `calibrate`; defaults to `pose` in the config.
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Fixed-camera intrinsics JSON; defaults to `fixed_intrinsics` in the config.
    #[arg(long)]
    pub fixed_intrinsics: Option<PathBuf>,
    /// Mobile-camera intrinsics JSON; defaults to `mobile_intrinsics` in the config.
    #[arg(long)]
    pub mobile_intrinsics: Option<PathBuf>,
    /// Minimum SLAM confidence kept, in [0, 1]; defaults to the config value.
    #[arg(long)]
    pub confidence_threshold: Option<f64>,
    /// Output control points CSV (`u,v,depth_m`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepthBackend {
    /// Relative inverse depth read from PFM files.
    File,
}

#[derive(Args, Debug)]
pub struct FrameSelection {
    /// Mask PGM pattern with `{id}` standing for the frame id.
    #[arg(long)]
    pub masks: Option<String>,
    /// Comma-separated frame ids; discovered from the files when omitted.
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<String>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Relative inverse-depth PFM pattern with `{id}` standing for the frame id.
    #[arg(long)]
    pub frames: Option<String>,
    #[command(flatten)]
    pub selection: FrameSelection,
    /// Control points CSV written by `init`; defaults to `control_points` in the config.
    #[arg(long)]
    pub control_points: Option<PathBuf>,
    /// Fixed-camera intrinsics JSON; defaults to `fixed_intrinsics` in the config.
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    /// Directory receiving one `<id>.json` report per frame.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// PPM overlay path; must contain `{id}` when several frames are run.
    #[arg(long)]
    pub overlay: Option<String>,
    #[arg(long, value_enum, default_value_t = DepthBackend::File)]
    pub depth_backend: DepthBackend,
    /// Smallest instance size in pixels; defaults to the config value.
    #[arg(long)]
    pub min_pixels: Option<usize>,
    /// Fraction of worst-fitting control points dropped before refitting.
    #[arg(long)]
    pub trim: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// Floor correspondences CSV (`u,v,X_m,Y_m`).
    #[arg(long)]
    pub ground: PathBuf,
    #[command(flatten)]
    pub selection: FrameSelection,
    /// Directory receiving one `<id>.json` file per frame.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Smallest instance size in pixels; defaults to the config value.
    #[arg(long)]
    pub min_pixels: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory of report JSON files from `run` or `baseline`.
    #[arg(long)]
    pub reports: PathBuf,
    /// Reference metric depth PFM pattern with `{id}`.
    #[arg(long)]
    pub reference: String,
    /// Mask PGM pattern with `{id}`; defaults to `masks` in the config.
    #[arg(long)]
    pub masks: Option<String>,
    /// Fixed-camera intrinsics JSON; defaults to `fixed_intrinsics` in the config.
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    /// Pairs farther apart than this in the reference (meters) are ignored.
    #[arg(long, default_value_t = socdist::evaluation::DEFAULT_MAX_REF_DISTANCE)]
    pub max_ref_distance: f64,
    /// Smallest instance size in pixels; defaults to the config value.
    #[arg(long)]
    pub min_pixels: Option<usize>,
    /// Also write the summary JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hide the floor behind a counter so the baseline is not applicable.
    #[arg(long)]
    pub hidden_ground: bool,
    /// Number of people; defaults to the preset.
    #[arg(long)]
    pub people: Option<usize>,
    /// Frame id used in the bundle file names.
    #[arg(long, default_value = "000000")]
    pub frame_id: String,
}

pub struct Context {
    pub config: PipelineConfig,
    pub json: bool,
    pub jobs: usize,
}

fn execute(cli: Cli) -> Result<Outcome, CliError> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => PipelineConfig::default(),
    };
    let jobs = cli
        .jobs
        .map(usize::from)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let ctx = Context {
        config,
        json: cli.json,
        jobs,
    };
    match cli.command {
        Command::Calibrate(a) => commands::calibrate(&ctx, a),
        Command::Init(a) => commands::init(&ctx, a),
        Command::Run(a) => commands::run(&ctx, a),
        Command::Baseline(a) => commands::baseline(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json = cli.json;
    match execute(cli) {
        Ok(out) => {
            if json {
                match to_sorted_json(&out.json) {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                }
            } else if !out.message.is_empty() {
                print!("{}", out.message);
            }
            match out.failure {
                Some(m) => {
                    eprintln!("error: {m}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
