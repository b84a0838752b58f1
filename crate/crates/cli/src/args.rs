use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use verge_core::features::FeatureSubset;
use verge_core::forest::DEFAULT_TREES;
use verge_core::pipeline::DepthChoice;

pub const DATA_DIR_ENV: &str = "VERGE_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "verge", version, about = "Internal-thought detection from binocular gaze")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic gaze recordings with ground-truth segments.
    Synth(SynthArgs),
    /// Gaze file to a feature CSV, one row per window.
    Extract(ExtractArgs),
    /// UI event log to labelled segments.
    Label(LabelArgs),
    /// Blur schedule for one session.
    Schedule(ScheduleArgs),
    /// Feature CSV to a model file.
    Train(TrainArgs),
    /// Leave-one-participant-out grid over window sizes and feature subsets.
    Eval(EvalArgs),
    /// Label the rows of a feature CSV.
    Predict(PredictArgs),
    /// Stream gaze through the alert engine; alerts go to stdout as JSONL.
    Alert(AlertArgs),
    /// Run the HTTP collector.
    Serve(ServeArgs),
}

fn subset(s: &str) -> Result<FeatureSubset, String> {
    s.parse().map_err(|e: verge_core::Error| e.to_string())
}

/// An integer depth, `none` for unlimited, or `tune`.
fn depth(s: &str) -> Result<DepthChoice, String> {
    match s {
        "tune" => Ok(DepthChoice::default()),
        "none" => Ok(DepthChoice::Fixed(None)),
        n => n
            .parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .map(|d| DepthChoice::Fixed(Some(d)))
            .ok_or_else(|| format!("expected a positive integer, `none` or `tune`, got {n:?}")),
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 60_000.0)]
    pub duration_ms: f64,
    #[arg(long, default_value_t = 1)]
    pub participants: usize,
    /// Output directory.
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GazeInput {
    /// Gaze recording, JSONL or CSV by extension.
    #[arg(long)]
    pub gaze: PathBuf,
    /// Screen geometry JSON; defaults to a 1680x1050 panel at 0.283 mm/px.
    #[arg(long)]
    pub screen: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: GazeInput,
    /// Segments JSON used to label windows.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Overrides the participant id taken from the file name.
    #[arg(long)]
    pub participant: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [250.0, 500.0, 750.0, 1000.0])]
    pub window_ms: Vec<f64>,
    #[arg(long, default_value_t = 4.0)]
    pub step_divisor: f64,
    /// Leave spontaneous on-task segments after slow deblurs unlabelled.
    #[arg(long)]
    pub engaged_only: bool,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Event log JSONL.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value_t = 1200.0)]
    pub td_ms: f64,
    #[arg(long, default_value_t = 300.0)]
    pub tr_ms: f64,
    /// Segments JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the deblur-time histogram as JSON.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 500.0)]
    pub bin_ms: f64,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub session: String,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub duration_ms: f64,
    /// Base seed; the session id is mixed in.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Extra labelled CSVs pooled into training.
    #[arg(long)]
    pub aux: Vec<PathBuf>,
    #[arg(long, value_parser = subset, default_value = "full")]
    pub features: FeatureSubset,
    #[arg(long, default_value_t = DEFAULT_TREES)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = depth, default_value = "tune")]
    pub max_depth: DepthChoice,
    /// Model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `<participant>.jsonl` recordings with
    /// `<participant>.segments.json` labels and an optional `screen.json`.
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    pub data_dir: PathBuf,
    /// Same layout; rows join every training fold and are never tested.
    #[arg(long)]
    pub aux_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [250.0, 500.0, 750.0, 1000.0])]
    pub window_ms: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = subset, default_values = ["full", "vergence", "classic"])]
    pub features: Vec<FeatureSubset>,
    #[arg(long, default_value_t = 4.0)]
    pub step_divisor: f64,
    #[arg(long)]
    pub engaged_only: bool,
    #[arg(long, default_value_t = DEFAULT_TREES)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = depth, default_value = "tune")]
    pub max_depth: DepthChoice,
    /// Writes report.json, report.txt and folds.csv here; the text table
    /// always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlertArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Replay a recording.
    #[arg(long, required_unless_present = "tcp", conflicts_with = "tcp")]
    pub gaze: Option<PathBuf>,
    /// Read gaze JSONL lines from this address.
    #[arg(long)]
    pub tcp: Option<String>,
    #[arg(long)]
    pub screen: Option<PathBuf>,
    /// Replay pace as a multiple of real time; 0 runs unpaced.
    #[arg(long, default_value_t = 0.0)]
    pub speed: f64,
    /// Also send alerts to the first client that connects here.
    #[arg(long)]
    pub alert_listen: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = verge_collector::BIND_ENV, default_value = verge_collector::DEFAULT_BIND)]
    pub bind: String,
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    pub data_dir: PathBuf,
    /// Built UI to serve at `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
