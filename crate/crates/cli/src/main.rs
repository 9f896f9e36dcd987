//! `gesture`: data preparation, training, inference, evaluation and
//! reporting for surgical gesture recognition.

mod commands;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gesture_core::data::{GestureVocabulary, Manifest};
use gesture_core::metrics::OverlapCriterion;
use gesture_core::training::TrainConfig;

#[derive(Parser)]
#[command(
    name = "gesture",
    version,
    about = "Surgical gesture recognition with dense-prediction 3D CNNs"
)]
struct Cli {
    /// Parent directory of the per-run output directories.
    #[arg(long, global = true, env = "GESTURE_RUNS_DIR", default_value = "runs")]
    runs_dir: PathBuf,
    /// Name of this run's output directory (default: command name and time).
    #[arg(long, global = true)]
    run_id: Option<String>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build manifest.tsv and vocab.tsv for a directory of transcripts and decoded frames.
    Prepare(PrepareArgs),
    /// Render the synthetic dataset.
    Synth(SynthArgs),
    /// Train one model, optionally holding out a subject.
    Train(TrainArgs),
    /// Write score dumps and label files for videos.
    Predict(PredictArgs),
    /// Score dumps or label files to a metrics report.
    Evaluate(EvaluateArgs),
    /// Leave-one-user-out cross-validation.
    Crossval(CrossvalArgs),
    /// Metrics as a function of the look-ahead, from score dumps.
    Sweep(SweepArgs),
    /// Forward-pass latency.
    Bench(BenchArgs),
    /// Color-ribbon plots of label sequences and the gesture legend.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// Dataset directory holding manifest.tsv and vocab.tsv.
    #[arg(long, env = "GESTURE_DATA_ROOT")]
    pub data_root: Option<PathBuf>,
    /// Manifest file (default: <data-root>/manifest.tsv).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Vocabulary file (default: <data-root>/vocab.tsv).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

impl DataArgs {
    fn resolve(&self, explicit: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        match (explicit, &self.data_root) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(root)) => Ok(root.join(name)),
            (None, None) => Err(Usage(format!(
                "no --{} and no --data-root / GESTURE_DATA_ROOT",
                name.trim_end_matches(".tsv")
            ))
            .into()),
        }
    }

    pub fn manifest(&self) -> Result<Manifest> {
        Ok(Manifest::load(&self.resolve(&self.manifest, "manifest.tsv")?)?)
    }

    pub fn vocabulary(&self) -> Result<GestureVocabulary> {
        let path = self.resolve(&self.vocab, "vocab.tsv")?;
        let text = std::fs::read_to_string(&path).map_err(|source| gesture_core::Error::Io { path, source })?;
        Ok(GestureVocabulary::parse(&text)?)
    }
}

#[derive(Args)]
pub struct PrepareArgs {
    #[arg(long, env = "GESTURE_DATA_ROOT")]
    pub data_root: PathBuf,
    /// Transcript directory, relative to the data root.
    #[arg(long, default_value = "transcriptions")]
    pub transcripts: PathBuf,
    /// Directory of per-video frame directories, relative to the data root.
    #[arg(long, default_value = "frames")]
    pub frames: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub native_fps: u32,
    /// Vocabulary file to use instead of the ten suturing gestures.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Dataset directory (default: <run dir>/data).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
    #[arg(long)]
    pub n_subjects: Option<usize>,
    #[arg(long)]
    pub videos_per_subject: Option<usize>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub motion_pairs: Option<usize>,
    #[arg(long)]
    pub native_fps: Option<u32>,
    #[arg(long)]
    pub working_fps: Option<u32>,
    #[arg(long)]
    pub segments_per_video: Option<usize>,
    #[arg(long)]
    pub mean_segment_len: Option<usize>,
    #[arg(long)]
    pub segment_jitter: Option<usize>,
    #[arg(long)]
    pub frame_size: Option<u32>,
    #[arg(long)]
    pub speed: Option<f32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Training configuration: defaults, then `--config`, then the typed flags,
/// then `--set` pairs.
#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// `key=value` file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, alias = "lr")]
    pub initial_lr: Option<f64>,
    #[arg(long)]
    pub lr_decay_factor: Option<f64>,
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
    #[arg(long)]
    pub snippets_per_epoch: Option<usize>,
    #[arg(long)]
    pub clip_len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// random, inflate or external.
    #[arg(long)]
    pub init_mode: Option<String>,
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub augment: Option<bool>,
    #[arg(long)]
    pub flip: Option<bool>,
    /// dense3d or frame2d.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub base_width: Option<usize>,
    #[arg(long)]
    pub input_size: Option<usize>,
    #[arg(long)]
    pub working_fps: Option<u32>,
}

impl ConfigArgs {
    pub fn build(&self) -> Result<TrainConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| gesture_core::Error::Io {
                    path: path.clone(),
                    source,
                })?;
                TrainConfig::parse(&text)?
            }
            None => TrainConfig::default(),
        };
        let typed = [
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("initial_lr", self.initial_lr.map(|v| v.to_string())),
            ("lr_decay_factor", self.lr_decay_factor.map(|v| v.to_string())),
            ("lr_decay_every", self.lr_decay_every.map(|v| v.to_string())),
            ("snippets_per_epoch", self.snippets_per_epoch.map(|v| v.to_string())),
            ("clip_len", self.clip_len.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("init_mode", self.init_mode.clone()),
            ("pretrained", self.pretrained.as_ref().map(|p| p.display().to_string())),
            ("checkpoint_every", self.checkpoint_every.map(|v| v.to_string())),
            ("augment", self.augment.map(|v| v.to_string())),
            ("flip", self.flip.map(|v| v.to_string())),
            ("arch", self.arch.clone()),
            ("base_width", self.base_width.map(|v| v.to_string())),
            ("input_size", self.input_size.map(|v| v.to_string())),
            ("working_fps", self.working_fps.map(|v| v.to_string())),
        ];
        for (key, value) in typed {
            if let Some(value) = value {
                config.set(key, &value)?;
            }
        }
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
            config.set(k.trim(), v.trim())?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Subject whose videos are left out of training (default: train on all).
    #[arg(long)]
    pub holdout: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Overlap {
    Iou,
    Gt,
}

impl From<Overlap> for OverlapCriterion {
    fn from(o: Overlap) -> Self {
        match o {
            Overlap::Iou => OverlapCriterion::Iou,
            Overlap::Gt => OverlapCriterion::OverGroundTruth,
        }
    }
}

#[derive(Args, Clone, Copy)]
pub struct EvalOptions {
    /// Evaluation rate, 5 or 10 Hz.
    #[arg(long, default_value_t = 5)]
    pub fps: u32,
    /// Sliding-window look-ahead in anchors (default: 3 s, i.e. 15 at 5 Hz, 30 at 10 Hz).
    #[arg(long)]
    pub lookahead: Option<usize>,
    /// Overlap used by the segmental F1.
    #[arg(long, value_enum, default_value_t = Overlap::Iou)]
    pub overlap: Overlap,
}

#[derive(Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint to run.
    #[arg(long)]
    pub model: PathBuf,
    /// Predict the videos of this subject.
    #[arg(long, conflicts_with = "video")]
    pub holdout: Option<String>,
    /// Video id; repeatable. Default: every video in the manifest.
    #[arg(long)]
    pub video: Vec<String>,
    #[command(flatten)]
    pub eval: EvalOptions,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Method {
    /// Newest column of each snippet.
    Snippet,
    /// Sliding-window accumulation.
    Window,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Score dump files or directories of `.gst` files.
    #[arg(long, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Window)]
    pub method: Method,
    /// Predicted label file; pairs up with `--gt` in order.
    #[arg(long, conflicts_with = "scores")]
    pub pred: Vec<PathBuf>,
    /// Ground-truth label file.
    #[arg(long, conflicts_with = "scores")]
    pub gt: Vec<PathBuf>,
    /// Fold name used in the report rows.
    #[arg(long, default_value = "eval")]
    pub fold: String,
    #[arg(long)]
    pub lookahead: Option<usize>,
    #[arg(long, value_enum, default_value_t = Overlap::Iou)]
    pub overlap: Overlap,
}

#[derive(Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Independent repetitions; repetition r uses seed + r.
    #[arg(long, default_value_t = 1)]
    pub repetitions: u64,
    /// Restrict to these held-out subjects; repeatable.
    #[arg(long)]
    pub holdout: Vec<String>,
    #[command(flatten)]
    pub eval: EvalOptions,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Score dump files or directories of `.gst` files.
    #[arg(long, required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Largest look-ahead (default: everything the dumps allow).
    #[arg(long)]
    pub max_lookahead: Option<usize>,
    #[arg(long, value_enum, default_value_t = Overlap::Iou)]
    pub overlap: Overlap,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Checkpoint to time; without it a randomly initialised network is built.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// dense3d or frame2d.
    #[arg(long, default_value = "dense3d")]
    pub arch: String,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 64)]
    pub base_width: usize,
    #[arg(long, default_value_t = 224)]
    pub input_size: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Timed forward passes.
    #[arg(short, long, default_value_t = 2500)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
}

#[derive(Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory of `predict`; one plot per video found in its `labels/`.
    #[arg(long, conflicts_with_all = ["gt", "pred"])]
    pub labels_dir: Option<PathBuf>,
    /// Ground-truth label file.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Prediction row as NAME=FILE; repeatable.
    #[arg(long, value_name = "NAME=FILE")]
    pub pred: Vec<String>,
    /// Plot title (default: ground-truth file stem).
    #[arg(long)]
    pub title: Option<String>,
}

/// Bad command-line input detected after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use gesture_core::Error as E;
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidConfig(_) => 1,
                E::NonFiniteLoss { .. } => 3,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    3
}

/// The error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    let mut last = out.clone();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            out = format!("{out}: {text}");
        }
        last = text;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let ctx = commands::Context {
        runs_dir: cli.runs_dir,
        run_id: cli.run_id,
    };
    let result = match cli.command {
        Command::Prepare(a) => commands::prepare(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Crossval(a) => commands::crossval(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
        Command::Plot(a) => commands::plot(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
