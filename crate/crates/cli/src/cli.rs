//! Argument grammar and top-level dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvsfusion::error::Result;
use mvsfusion::evalbench::SceneKind;
use mvsfusion::pipeline::FuseMode;

use crate::commands;
use crate::config::AppConfig;

fn parse_scene_kind(s: &str) -> std::result::Result<SceneKind, String> {
    s.parse().map_err(|e: mvsfusion::Error| e.to_string())
}

/// `--mode` values, mapped onto the pipeline's fusion modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Windowed constraint-volume fusion.
    Vcv,
    /// Dense sweep over the full depth range with uniform hypotheses.
    BruteForce,
    /// Per-candidate scoring baseline without a volume.
    Conventional,
}

impl From<ModeArg> for FuseMode {
    fn from(mode: ModeArg) -> FuseMode {
        match mode {
            ModeArg::Vcv => FuseMode::Vcv,
            ModeArg::BruteForce => FuseMode::BruteForce,
            ModeArg::Conventional => FuseMode::Conventional,
        }
    }
}

/// Multi-view depth-map fusion toolkit.
#[derive(Debug, Parser)]
#[command(name = "mvsfuse", version, about = "Fuse multi-view depth maps with per-pixel search windows and visibility constraints", max_term_width = 100)]
pub struct Cli {
    /// Configuration file (.toml or .json); missing fields take defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: VFUSE_THREADS, then all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene directory.
    Synth(SynthArgs),
    /// Fuse the reference views of a scene directory.
    Fuse(FuseArgs),
    /// Evaluate input and fused maps against ground truth.
    Eval(EvalArgs),
    /// Fit pipeline parameters on one or more scenes.
    Fit(FitArgs),
    /// Export point clouds and Chamfer distances.
    Cloud(CloudArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output scene directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Random seed for noise, outliers, and confidence jitter.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Scene geometry: plane, sphere, step, or occluder.
    #[arg(long, value_parser = parse_scene_kind)]
    pub kind: Option<SceneKind>,

    /// Image height in pixels.
    #[arg(long)]
    pub height: Option<usize>,

    /// Image width in pixels.
    #[arg(long)]
    pub width: Option<usize>,

    /// Number of views on the camera arc.
    #[arg(long)]
    pub views: Option<usize>,

    /// Gaussian depth-noise standard deviation (depth units).
    #[arg(long)]
    pub noise: Option<f64>,

    /// Fraction of valid pixels replaced by uniform outlier depths.
    #[arg(long)]
    pub outliers: Option<f64>,

    /// Gaussian jitter added to confidences before clamping.
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Scene directory to fuse.
    #[arg(long, value_name = "DIR")]
    pub scene: PathBuf,

    /// Output directory for fused views.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Fusion mode (default from config: vcv).
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,

    /// Shorthand for `--mode brute-force`.
    #[arg(long, conflicts_with = "mode")]
    pub brute_force: bool,

    /// Hypotheses per pixel in windowed mode.
    #[arg(long)]
    pub hypotheses: Option<usize>,

    /// Hypotheses per pixel in brute-force mode.
    #[arg(long)]
    pub brute_force_hypotheses: Option<usize>,

    /// Views per fusion including the reference.
    #[arg(long)]
    pub views: Option<usize>,

    /// Fuse only these reference views (repeatable; default: all).
    #[arg(long = "ref", value_name = "INDEX")]
    pub refs: Vec<usize>,

    /// Also write each view's constraint volume (vcv.raw + vcv.json).
    #[arg(long)]
    pub dump_vcv: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scene directory with ground truth.
    #[arg(long, value_name = "DIR")]
    pub scene: PathBuf,

    /// Fusion output directory to evaluate.
    #[arg(long, value_name = "DIR")]
    pub fused: PathBuf,

    /// Output directory for metrics.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Write per-view error heat maps (PNG).
    #[arg(long)]
    pub report_png: bool,

    /// Also export point clouds and Chamfer distances.
    #[arg(long)]
    pub cloud: bool,

    /// Absolute depth error counting as an inlier.
    #[arg(long)]
    pub inlier_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Scene directories to fit on (repeatable).
    #[arg(long = "scene", value_name = "DIR", required = true)]
    pub scenes: Vec<PathBuf>,

    /// Output directory for fitted parameters and the trace.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Reference view fitted per scene (default: the middle view).
    #[arg(long = "ref", value_name = "INDEX")]
    pub r#ref: Option<usize>,

    /// Gradient-descent epochs.
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Initial learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CloudArgs {
    /// Scene directory (inputs and ground truth).
    #[arg(long, value_name = "DIR")]
    pub scene: PathBuf,

    /// Fusion output directory to export as well.
    #[arg(long, value_name = "DIR")]
    pub fused: Option<PathBuf>,

    /// Output directory for PLY files and Chamfer distances.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Skip the consistency-filtered cloud variants.
    #[arg(long)]
    pub no_filter: bool,
}

/// Load the configuration named by `--config` (or defaults) and run the
/// selected command.
pub fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    let jobs = crate::jobs::resolve_jobs(cli.jobs);
    match &cli.command {
        Command::Synth(args) => commands::synth::run(&mut config, args),
        Command::Fuse(args) => commands::fuse::run(&mut config, args, jobs),
        Command::Eval(args) => commands::eval::run(&mut config, args),
        Command::Fit(args) => commands::fit::run(&mut config, args),
        Command::Cloud(args) => commands::cloud::run(&config, args),
    }
}
