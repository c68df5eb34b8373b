//! `mixblend` command-line tool.
//!
//! Exit codes: 0 on success, 1 for configuration or argument errors, 2 for
//! data errors (unreadable or malformed inputs, empty pools, failed extraction).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "mixblend",
    version,
    about = "Synthetic surgical-tool segmentation datasets from chroma-key footage"
)]
struct Cli {
    /// Repeat for more log output (warn, info, debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract tool images and masks from green-screen frames.
    Extract(ExtractArgs),
    /// Generate a dataset of blended image/label pairs.
    Generate(GenerateArgs),
    /// Refine a probability map into a binary mask with GrabCut.
    Refine(RefineArgs),
    /// Adapt the low-frequency amplitude of a target image to a source image.
    Adapt(AdaptArgs),
    /// Score predicted masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Write a contact sheet of the first samples a configuration produces.
    Preview(PreviewArgs),
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input_dir: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Backdrop hue range in degrees; `hue_lo > hue_hi` wraps around 360.
    #[arg(long, default_value_t = 70.0)]
    pub hue_lo: f64,
    #[arg(long, default_value_t = 170.0)]
    pub hue_hi: f64,
    /// Minimum backdrop saturation in [0,1].
    #[arg(long, default_value_t = 0.3)]
    pub sat_lo: f64,
    /// Minimum backdrop value in [0,1].
    #[arg(long, default_value_t = 0.15)]
    pub val_lo: f64,
    /// Number of tools visible in each frame.
    #[arg(long, default_value_t = 1)]
    pub instruments: usize,
    /// Refine mask boundaries with GrabCut.
    #[arg(long)]
    pub refine: bool,
}

/// Options shared by every command that runs the generator.
#[derive(Args, Debug)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `augment.corruption.p_jpeg=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub fg_dir: Option<PathBuf>,
    #[arg(long)]
    pub bg_dir: Option<PathBuf>,
    /// mix_blend, multi_blend, single:trivial, single:feather or single:laplacian.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Probability map as 8-bit grayscale, value/255.
    #[arg(long)]
    pub prob: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.8)]
    pub hi: f64,
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AdaptArgs {
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long, default_value_t = mixblend::fourier::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Predictions are probability maps to binarize at `--threshold`.
    #[arg(long)]
    pub prob: bool,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Group frames into sequences by file-name prefix (the stem up to its last `_`).
    #[arg(long)]
    pub group_by_prefix: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PreviewArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Extract(a) => commands::extract(&a),
        Command::Generate(a) => commands::generate(&a),
        Command::Refine(a) => commands::refine(&a),
        Command::Adapt(a) => commands::adapt(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Preview(a) => commands::preview(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
