//! `bitforensics` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use bitforensics::alignment::DEFAULT_TAU;
use bitforensics::detect_eval::ApInterp;
use bitforensics::{AlignmentConfig, RuleConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] bitforensics::Error),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Invalid(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "bitforensics",
    version,
    about = "Drill-bit cutter damage forensics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pair every located cutter with its damage detection.
    Align(AlignArgs),
    /// Diagnose failure causes with the rule engine.
    Diagnose(DiagnoseArgs),
    /// Fit a decision-tree or random-forest cause model.
    Fit(FitArgs),
    /// Predict failure causes with a fitted model.
    Predict(PredictArgs),
    /// Score detections against ground-truth boxes.
    EvalDet(EvalDetArgs),
    /// Score predicted failure causes against labels.
    EvalCause(EvalCauseArgs),
    /// Per-bit table of existing, detected and falsely detected causes.
    Tally(TallyArgs),
    /// Write the ten-bit synthetic benchmark dataset and its cause labels.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct Inputs {
    /// Bit manifest (repeatable).
    #[arg(long = "manifest", value_name = "FILE")]
    pub manifests: Vec<PathBuf>,
    /// Directory whose `*.json` files are bit manifests.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AlignOpts {
    /// Center-distance radius in normalized image units.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Run on the ground-truth annotations instead of the detections.
    #[arg(long)]
    pub use_gt: bool,
}

impl AlignOpts {
    pub fn config(&self) -> CliResult<AlignmentConfig> {
        AlignmentConfig::new(self.tau).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args, Debug)]
pub struct OutOpts {
    /// Write the report here instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    align: AlignOpts,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
pub struct RuleOpts {
    /// JSON file with rule thresholds; missing keys keep their defaults.
    #[arg(long, value_name = "FILE")]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub green_fraction: Option<f64>,
    #[arg(long)]
    pub nose_missing_min: Option<u32>,
    #[arg(long)]
    pub shoulder_missing_min: Option<u32>,
    #[arg(long)]
    pub unmissing_max: Option<u32>,
    #[arg(long)]
    pub coreout_missing_min: Option<u32>,
    #[arg(long)]
    pub stickslip_core_count: Option<u32>,
    #[arg(long)]
    pub heavy_damage_min: Option<u32>,
    #[arg(long)]
    pub nose_shoulder_thermal_ratio: Option<f64>,
    #[arg(long)]
    pub shoulder_green_fraction: Option<f64>,
}

impl RuleOpts {
    pub fn config(&self) -> CliResult<RuleConfig> {
        let mut cfg = match &self.rules {
            Some(path) => serde_json::from_str(&io::read_text(path)?)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
            None => RuleConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(
            green_fraction,
            nose_missing_min,
            shoulder_missing_min,
            unmissing_max,
            coreout_missing_min,
            stickslip_core_count,
            heavy_damage_min,
            nose_shoulder_thermal_ratio,
            shoulder_green_fraction
        );
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    align: AlignOpts,
    #[command(flatten)]
    rules: RuleOpts,
    /// Print the human-readable rule trace instead of a report.
    #[arg(long)]
    explain: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Decision tree per cause.
    Dt,
    /// Random forest per cause.
    Rf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    align: AlignOpts,
    /// Cause-label CSV covering every input bit.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Dt)]
    model: ModelKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,
    /// Also write leave-one-out predictions (cause CSV) to this file.
    #[arg(long, value_name = "FILE")]
    loo_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    align: AlignOpts,
    /// Model file written by `fit`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detector {
    Location,
    Damage,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Continuous,
    #[value(name = "11point")]
    ElevenPoint,
}

impl From<Interp> for ApInterp {
    fn from(i: Interp) -> Self {
        match i {
            Interp::Continuous => ApInterp::Continuous,
            Interp::ElevenPoint => ApInterp::ElevenPoint,
        }
    }
}

#[derive(Args, Debug)]
struct EvalDetArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Which detector stream to score.
    #[arg(long, value_enum, default_value_t = Detector::Location)]
    detector: Detector,
    /// Confidence cut for the precision, recall and confusion figures.
    #[arg(long, default_value_t = 0.25)]
    conf_thr: f64,
    #[arg(long, value_enum, default_value_t = Interp::Continuous)]
    ap_interp: Interp,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
struct EvalCauseArgs {
    /// Predicted causes (cause CSV).
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// True causes (cause CSV).
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Score stick-slip as well.
    #[arg(long)]
    include_stickslip: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
struct TallyArgs {
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Align(a) => commands::align(&a.inputs, &a.align, a.format, &a.out),
        Command::Diagnose(a) => {
            commands::diagnose(&a.inputs, &a.align, &a.rules, a.explain, a.format, &a.out)
        }
        Command::Fit(a) => commands::fit(commands::FitOpts {
            inputs: &a.inputs,
            align: &a.align,
            labels: &a.labels,
            model: a.model,
            seed: a.seed,
            n_trees: a.n_trees,
            max_depth: a.max_depth,
            min_samples_split: a.min_samples_split,
            loo_out: a.loo_out.as_deref(),
            out: &a.out,
        }),
        Command::Predict(a) => commands::predict(&a.inputs, &a.align, &a.model, a.format, &a.out),
        Command::EvalDet(a) => commands::eval_det(
            &a.inputs,
            a.detector,
            a.conf_thr,
            a.ap_interp.into(),
            a.format,
            &a.out,
        ),
        Command::EvalCause(a) => {
            commands::eval_cause(&a.pred, &a.truth, a.include_stickslip, a.format, &a.out)
        }
        Command::Tally(a) => commands::tally(&a.pred, &a.truth, a.format, &a.out),
        Command::Synth(a) => commands::synth(&a.dir, a.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
