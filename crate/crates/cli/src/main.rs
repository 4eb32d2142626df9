use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};


/// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<igcn::Error> for Failure {
    fn from(e: igcn::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
pub fn emit(args: std::fmt::Arguments<'_>, newline: bool) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let res = out.write_fmt(args).and_then(|_| if newline { out.write_all(b"\n") } else { Ok(()) });
    if let Err(e) = res.and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

macro_rules! outln {
    ($($t:tt)*) => { $crate::emit(format_args!($($t)*), true) };
}

macro_rules! out {
    ($($t:tt)*) => { $crate::emit(format_args!($($t)*), false) };
}

mod commands;

/// Conversation-type classification for egocentric video clips.
///
/// Log verbosity is read from IGCN_LOG (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "igcn", version)]
pub struct Cli {
    /// Run configuration (TOML or JSON); command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a balanced synthetic corpus with a train/val/test manifest.
    Synth(SynthArgs),
    /// Train a model on a corpus directory.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a corpus.
    Eval(EvalArgs),
    /// Predict the class of every clip in a JSON Lines file.
    Predict(PredictArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Fit the face-height to distance polynomial from a CSV of samples.
    FitDistanceModel(FitArgs),
    /// Print the relational graph of one frame as JSON.
    DumpGraph(DumpGraphArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Clips per class.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory (clips.jsonl, manifest.json, calibration.json).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for checkpoint, history and metrics.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Calibration JSON replacing the corpus one.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Named hyperparameter preset applied before other flags.
    #[arg(long, value_parser = ["synthetic", "conservative"])]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Disable a cue; repeatable. One of head-orientation, head-localization,
    /// mutual-attention, pairwise-distance, first-person-motion.
    #[arg(long = "ablate")]
    pub ablate: Vec<String>,
    #[arg(long)]
    pub no_augment: bool,
    /// Hold out this fraction of the training split for validation.
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Fill the seconds column of the history with wall-clock time.
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Node slots to tensorize with; must match the checkpoint.
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Metrics CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Confusion-matrix CSV destination.
    #[arg(long)]
    pub confusion_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub clips: PathBuf,
    /// Defaults to calibration.json next to the clips file.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    /// Test hook: corrupt one analytic gradient entry.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV rows of face_height_px,distance_m; a header row is allowed.
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DumpGraphArgs {
    #[arg(long)]
    pub clips: PathBuf,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Defaults to the first clip.
    #[arg(long)]
    pub clip_id: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IGCN_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
