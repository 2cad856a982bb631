//! `train`, `predict` and `eval`.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use shygamp::io::{error_rate_estimate, fold_split, fraction_split, Preprocessor, ReportRecord};
use shygamp::model::predict_all;
use shygamp::{Dataset, Features, TrainOptions};

use crate::common::{
    base_report, describe, emit, fit, usage, CliError, CliResult, Fit, InputArgs, ModelFile, PreprocessArgs, TrainArgs,
    ZscoreScope,
};

#[derive(Args, Debug)]
pub struct TrainCmd {
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    /// Report destination [default: stdout].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Model file for `predict`.
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictCmd {
    /// Model file written by `train --weights-out`.
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// One predicted label per line [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalCmd {
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    /// Held-out test file in the same format as --input.
    #[arg(long, conflicts_with_all = ["folds", "test_fraction"])]
    pub test: Option<PathBuf>,
    /// T-fold cross-validation.
    #[arg(long, conflicts_with = "test_fraction")]
    pub folds: Option<usize>,
    /// Random hold-out fraction.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn train(cmd: &TrainCmd, run_id: String) -> CliResult<()> {
    let opts = cmd.train.options()?;
    let (raw, labels) = cmd.input.read()?;
    let pre = Preprocessor::fit(raw.features(), &cmd.prep.preprocess)?;
    let ds = pre.apply(&raw)?;
    let fitted = fit(&ds, &opts)?;
    let report = base_report(run_id, &opts, &fitted, describe(&cmd.input.input, &raw, &labels));
    if let Some(path) = &cmd.weights_out {
        let model = ModelFile {
            mode: opts.config.mode,
            moment_method: (opts.config.mode == shygamp::Mode::SumProduct).then_some(opts.config.moment_method),
            tuner: opts.config.tuner,
            labels,
            preprocessor: pre,
            weights: fitted.result.weights.clone(),
        };
        let text = serde_json::to_string(&model).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    emit(cmd.report.as_deref(), &report.to_json())
}

pub fn predict(cmd: &PredictCmd) -> CliResult<()> {
    let text = fs::read_to_string(&cmd.weights).map_err(|e| CliError::Runtime(format!("{}: {e}", cmd.weights.display())))?;
    let model: ModelFile =
        serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", cmd.weights.display())))?;
    let raw = cmd.input.read_raw(&cmd.input.input, Some(model.preprocessor.input_features))?;
    let features = model.preprocessor.apply_features(&raw.features)?;
    let classes = predict_all(&model.weights, &features)?;
    let mut out = String::new();
    for c in classes {
        out.push_str(model.labels.decode(c));
        out.push('\n');
    }
    emit(cmd.out.as_deref(), &out)
}

/// Counts of one train/test evaluation.
struct Outcome {
    fit: Fit,
    errors: usize,
    tested: usize,
    evaluation: f64,
}

fn evaluate(train: &Dataset, test: &Dataset, pre_source: Option<&Features>, steps: &PreprocessArgs, opts: &TrainOptions) -> CliResult<Outcome> {
    let pre = Preprocessor::fit(pre_source.unwrap_or(train.features()), &steps.preprocess)?;
    let fitted = fit(&pre.apply(train)?, opts)?;
    let start = Instant::now();
    let predicted = predict_all(&fitted.result.weights, &pre.apply_features(test.features())?)?;
    let errors = predicted.iter().zip(test.labels()).filter(|(p, y)| p != y).count();
    Ok(Outcome { fit: fitted, errors, tested: test.num_samples(), evaluation: start.elapsed().as_secs_f64() })
}

pub fn eval(cmd: &EvalCmd, run_id: String) -> CliResult<()> {
    let opts = cmd.train.options()?;
    let splits = [cmd.test.is_some(), cmd.folds.is_some(), cmd.test_fraction.is_some()];
    if splits.iter().filter(|&&s| s).count() != 1 {
        return usage("eval needs exactly one of --test, --folds, --test-fraction");
    }
    if cmd.folds.is_some_and(|t| t < 2) {
        return usage("--folds needs at least 2 folds");
    }
    if cmd.test_fraction.is_some_and(|f| !(f > 0.0 && f < 1.0)) {
        return usage("--test-fraction must lie in (0, 1)");
    }
    let (data, labels) = cmd.input.read()?;
    let all = (cmd.prep.zscore_scope == ZscoreScope::All).then(|| data.features());

    let outcomes: Vec<Outcome> = if let Some(path) = &cmd.test {
        let raw = cmd.input.read_raw(path, Some(data.num_features()))?;
        let test = raw.into_dataset_with(&labels)?;
        vec![evaluate(&data, &test, all, &cmd.prep, &opts)?]
    } else {
        let m = data.num_samples();
        let parts: Vec<(Vec<usize>, Vec<usize>)> = match cmd.folds {
            Some(t) => (0..t).map(|k| fold_split(m, t, k, opts.config.seed)).collect::<Result<_, _>>()?,
            None => vec![fraction_split(m, cmd.test_fraction.unwrap_or_default(), opts.config.seed)?],
        };
        parts
            .par_iter()
            .enumerate()
            .map(|(k, (train_idx, test_idx))| {
                let mut fold_opts = opts.clone();
                fold_opts.config.seed = opts.config.seed.wrapping_add(k as u64);
                log::info!("fold {}/{}", k + 1, parts.len());
                evaluate(&data.subset(train_idx)?, &data.subset(test_idx)?, all, &cmd.prep, &fold_opts)
            })
            .collect::<CliResult<_>>()?
    };

    let report = summarize(run_id, &opts, &outcomes, describe(&cmd.input.input, &data, &labels))?;
    emit(cmd.report.as_deref(), &report.to_json())
}

/// Pools fold counts; iteration and sparsity figures are fold averages and the
/// hyperparameters are those of the first fold.
fn summarize(
    run_id: String,
    opts: &TrainOptions,
    outcomes: &[Outcome],
    mut dataset: shygamp::io::DatasetDescriptor,
) -> CliResult<ReportRecord> {
    let errors: usize = outcomes.iter().map(|o| o.errors).sum();
    let tested: usize = outcomes.iter().map(|o| o.tested).sum();
    let (rate, se) = error_rate_estimate(errors, tested)?;
    let count = outcomes.len() as f64;
    let mean = |f: &dyn Fn(&Outcome) -> usize| (outcomes.iter().map(f).sum::<usize>() as f64 / count).round() as usize;
    let k99: Option<Vec<usize>> = outcomes.iter().map(|o| o.fit.result.weights.sparsity().ok().map(|s| s.k99)).collect();

    dataset.test_samples = Some(tested);
    let mut report = base_report(run_id, opts, &outcomes[0].fit, dataset);
    report.iterations = mean(&|o| o.fit.result.iterations_run);
    report.converged = outcomes.iter().all(|o| o.fit.result.converged);
    report.times.tuning = outcomes.iter().map(|o| o.fit.tuning).sum();
    report.times.training = outcomes.iter().map(|o| o.fit.training).sum();
    report.times.evaluation = outcomes.iter().map(|o| o.evaluation).sum();
    report.error_rate = Some(rate);
    report.error_se = Some(se);
    report.k99 = k99.map(|v| (v.iter().sum::<usize>() as f64 / count).round() as usize);
    report.l0 = mean(&|o| shygamp::model::l0(&o.fit.result.weights));
    Ok(report)
}

