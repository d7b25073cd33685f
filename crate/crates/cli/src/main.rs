//! Command-line front end: sweep objective functions over interpolated
//! transform paths on KITTI or synthetic frame pairs, apply data filters
//! standalone, dump feature labels, and generate synthetic scenes.

mod commands;
mod manifest;
mod variant;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::OutputTracker;

#[derive(Parser)]
#[command(
    name = "regsweep",
    version,
    about = "Point cloud registration objective sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample objective functions along an interpolated transform path and
    /// write one curve table per variant plus a reproducible manifest.
    Sweep(SweepArgs),
    /// Apply one data filter to a cloud pair and write the filtered clouds.
    Filter(FilterArgs),
    /// Compute per-point smoothness values and edge/planar labels.
    Features(FeaturesArgs),
    /// Generate a synthetic two-frame scene with ground truth and labels.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct SweepArgs {
    /// KITTI odometry root (contains sequences/ and poses/).
    #[arg(long)]
    pub kitti_root: Option<PathBuf>,
    /// Sequence name, e.g. 00.
    #[arg(long)]
    pub sequence: Option<String>,
    /// Frame index; once for the pair (n, n+1), twice for an explicit pair.
    #[arg(long)]
    pub frame: Vec<usize>,
    /// Synthetic scene description (JSON).
    #[arg(long)]
    pub scene_spec: Option<PathBuf>,
    /// Seed for synthetic scene noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-run a previously written manifest instead of specifying inputs.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Pipeline variant, repeatable: an objective name optionally followed
    /// by +modifiers (ocf, ego-overlap, artificial-blindspot, reciprocal).
    /// Defaults to the five plain objectives.
    #[arg(long)]
    pub variant: Vec<String>,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub u_min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub u_max: f64,
    /// Number of path samples.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Voxel edge length for the occupancy correspondence filter (meters).
    #[arg(long, default_value_t = 0.1)]
    pub voxel_size: f64,
    /// Blind spot radius for the ego-overlap and artificial filters (meters).
    #[arg(long, default_value_t = 5.0)]
    pub blindspot_radius: f64,
    /// Distance tolerance for relaxed reciprocal matching (meters).
    #[arg(long, default_value_t = 0.0)]
    pub reciprocal_relaxation: f64,
    /// Neighborhood size for normal estimation.
    #[arg(long, default_value_t = 10)]
    pub normal_k: usize,
    /// Filter alignment estimate: previous, ground-truth, or identity.
    /// Defaults to previous on KITTI input and ground-truth on synthetic.
    #[arg(long)]
    pub estimate: Option<String>,
    /// Path start (u = 0): identity, previous, or a literal x,y,z translation.
    #[arg(long, default_value = "identity", allow_hyphen_values = true)]
    pub t0: String,
    /// Output directory for curve tables and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FilterArgs {
    /// Source cloud (raw scan layout).
    #[arg(long)]
    pub source: PathBuf,
    /// Reference cloud (raw scan layout).
    #[arg(long)]
    pub reference: PathBuf,
    /// Filter to apply: ocf, ego-overlap, or artificial-blindspot.
    #[arg(long)]
    pub filter: String,
    #[arg(long, default_value_t = 0.1)]
    pub voxel_size: f64,
    #[arg(long, default_value_t = 5.0)]
    pub blindspot_radius: f64,
    /// Alignment estimate as a 12-decimal pose line; identity when omitted.
    #[arg(long)]
    pub estimate_file: Option<PathBuf>,
    /// Output directory for the filtered clouds and report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FeaturesArgs {
    /// Input cloud (raw scan layout).
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub neighborhood_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub planar_threshold: f64,
    /// Output table path (one `index smoothness label` row per point).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scene description (JSON).
    #[arg(long)]
    pub scene_spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for clouds, ground truth, and labels.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut tracker = OutputTracker::default();
    let result = match &cli.command {
        Command::Sweep(args) => commands::cmd_sweep(args, &mut tracker),
        Command::Filter(args) => commands::cmd_filter(args, &mut tracker),
        Command::Features(args) => commands::cmd_features(args, &mut tracker),
        Command::Synth(args) => commands::cmd_synth(args, &mut tracker),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            tracker.remove_all();
            ExitCode::FAILURE
        }
    }
}
