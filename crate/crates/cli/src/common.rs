//! Arguments and helpers shared by the subcommands.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use shygamp::input::Hyperparameters;
use shygamp::io::{parse_csv, parse_svmlight, DatasetDescriptor, LabelMap, PhaseTimes, Preprocessor, RawData, ReportRecord, Step};
use shygamp::output::MomentMethod;
use shygamp::{Dataset, Mode, TrainOptions, TrainResult, Tuner, WeightMatrix};

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<shygamp::Error> for CliError {
    fn from(e: shygamp::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Message-passing flavor.
    #[arg(long, default_value = "msa")]
    pub mode: Mode,
    /// Moment approximation for sum-product mode [default: gm].
    #[arg(long)]
    pub moments: Option<MomentMethod>,
    /// Hyperparameter tuner [default: sure for msa, em for spa].
    #[arg(long)]
    pub tuner: Option<Tuner>,
    /// Laplacian scale (fixed value, or SURE starting point).
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Damping factor in (0, 1]; 1 disables damping.
    #[arg(long, default_value_t = 0.3)]
    pub damping: f64,
    #[arg(long)]
    pub adaptive_damping: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mixture components of the likelihood approximation.
    #[arg(long, default_value_t = 2)]
    pub gm_components: usize,
}

impl TrainArgs {
    pub fn options(&self) -> CliResult<TrainOptions> {
        if self.mode == Mode::MinSum && self.moments.is_some() {
            return usage("--moments applies to --mode spa only");
        }
        let mut opts = TrainOptions::for_mode(self.mode);
        if let Some(t) = self.tuner {
            opts.config.tuner = t;
        }
        if let Some(m) = self.moments {
            opts.config.moment_method = m;
        }
        opts.config.max_iters = self.max_iters;
        opts.config.tol = self.tol;
        opts.config.damping = self.damping;
        opts.config.adaptive_damping = self.adaptive_damping;
        opts.config.seed = self.seed;
        opts.lambda = self.lambda;
        opts.gm_components = self.gm_components;
        opts.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(opts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Svmlight,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Dataset file (SVMLight or CSV with header).
    #[arg(long)]
    pub input: PathBuf,
    /// File format [default: from the extension, csv or svmlight].
    #[arg(long)]
    pub format: Option<Format>,
    /// Label column of CSV input.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Feature count of SVMLight input [default: largest index].
    #[arg(long)]
    pub num_features: Option<usize>,
}

impl InputArgs {
    pub fn format_of(&self, path: &Path) -> Format {
        self.format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Svmlight,
        })
    }

    pub fn read_raw(&self, path: &Path, num_features: Option<usize>) -> CliResult<RawData> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let raw = match self.format_of(path) {
            Format::Svmlight => parse_svmlight(&text, num_features.or(self.num_features)),
            Format::Csv => parse_csv(&text, &self.label_column),
        };
        raw.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }

    pub fn read(&self) -> CliResult<(Dataset, LabelMap)> {
        Ok(self.read_raw(&self.input, None)?.into_dataset()?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct PreprocessArgs {
    /// Comma-separated steps applied in order: log2, zscore.
    #[arg(long, value_delimiter = ',')]
    pub preprocess: Vec<Step>,
    /// Data used for the z-score statistics during evaluation.
    #[arg(long, value_enum, default_value = "train")]
    pub zscore_scope: ZscoreScope,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ZscoreScope {
    Train,
    All,
}

/// Everything `predict` needs to score new data.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub mode: Mode,
    pub moment_method: Option<MomentMethod>,
    pub tuner: Tuner,
    pub labels: LabelMap,
    pub preprocessor: Preprocessor,
    pub weights: WeightMatrix,
}

/// Training outcome with its phase timing.
pub struct Fit {
    pub result: TrainResult,
    pub tuning: f64,
    pub training: f64,
}

impl Fit {
    pub fn hyperparameters(&self) -> Hyperparameters {
        self.result.trace.last().map(|r| r.hyperparameters.clone()).unwrap_or(Hyperparameters::None)
    }
}

pub fn fit(dataset: &Dataset, opts: &TrainOptions) -> CliResult<Fit> {
    let start = Instant::now();
    let result = shygamp::train(dataset, opts)?;
    let total = start.elapsed().as_secs_f64();
    let tuning: f64 = result.trace.iter().map(|r| r.tuner_seconds).sum();
    Ok(Fit { result, tuning, training: (total - tuning).max(0.0) })
}

pub fn moment_label(opts: &TrainOptions) -> Option<String> {
    (opts.config.mode == Mode::SumProduct).then(|| opts.config.moment_method.to_string())
}

pub fn tuner_label(t: Tuner) -> String {
    match t {
        Tuner::Em => "em",
        Tuner::Sure => "sure",
        Tuner::Fixed => "fixed",
    }
    .to_string()
}

/// Report fields shared by every training subcommand; error fields are left empty.
pub fn base_report(run_id: String, opts: &TrainOptions, fit: &Fit, dataset: DatasetDescriptor) -> ReportRecord {
    let sparsity = fit.result.weights.sparsity().ok();
    ReportRecord {
        run_id,
        mode: opts.config.mode.to_string(),
        moment_method: moment_label(opts),
        tuner: tuner_label(opts.config.tuner),
        iterations: fit.result.iterations_run,
        converged: fit.result.converged,
        times: PhaseTimes { tuning: fit.tuning, training: fit.training, evaluation: 0.0 },
        error_rate: None,
        error_se: None,
        k99: sparsity.map(|s| s.k99),
        l0: shygamp::model::l0(&fit.result.weights),
        hyperparameters: fit.hyperparameters(),
        seed: opts.config.seed,
        dataset,
    }
}

pub fn describe(source: &Path, dataset: &Dataset, labels: &LabelMap) -> DatasetDescriptor {
    DatasetDescriptor {
        source: source.display().to_string(),
        num_samples: dataset.num_samples(),
        num_features: dataset.num_features(),
        num_classes: dataset.num_classes(),
        labels: labels.values().to_vec(),
        test_samples: None,
    }
}

/// 64-bit FNV-1a of the argument list, as 16 hex digits.
pub fn run_id(args: &[String]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in args.join("\u{1f}").bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}
