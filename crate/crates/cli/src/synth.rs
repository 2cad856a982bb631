//! `synth`: matched synthetic data, single runs and parameter sweeps.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use shygamp::io::{write_svmlight, DatasetDescriptor, LabelMap, ReportRecord};
use shygamp::synth::{calibrate_variance, expected_error, gen_dataset, gen_means, ClassModel};
use shygamp::{Mode, TrainOptions, Tuner};

use crate::common::{base_report, emit, fit, usage, CliError, CliResult, TrainArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    #[value(name = "M")]
    M,
    #[value(name = "N")]
    N,
    #[value(name = "K")]
    K,
    #[value(name = "lambda")]
    Lambda,
}

#[derive(Args, Debug)]
pub struct SynthCmd {
    /// Training samples (a multiple of D).
    #[arg(long = "M", default_value_t = 300)]
    pub m: usize,
    /// Features.
    #[arg(long = "N", default_value_t = 10_000)]
    pub n: usize,
    /// Discriminatory features.
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    /// Classes.
    #[arg(long = "D", default_value_t = 4)]
    pub d: usize,
    /// Target Bayes error rate.
    #[arg(long, default_value_t = 0.1)]
    pub ber: f64,
    /// Place the discriminatory features at random indices.
    #[arg(long)]
    pub permute_support: bool,
    /// Independent training sets per configuration.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Monte Carlo draws for the expected error.
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    /// Monte Carlo draws per class for the noise calibration.
    #[arg(long, default_value_t = 100_000)]
    pub calib_samples: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Save the first training set in SVMLight format.
    #[arg(long)]
    pub write: Option<PathBuf>,
    /// Only generate data (requires --write).
    #[arg(long, requires = "write")]
    pub no_train: bool,
    /// Parameter varied across --values.
    #[arg(long, requires = "values")]
    pub sweep: Option<Sweep>,
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    pub values: Vec<f64>,
    /// Sweep table destination [default: stdout].
    #[arg(long, requires = "sweep")]
    pub table: Option<PathBuf>,
    /// Report destination for single runs [default: stdout].
    #[arg(long, conflicts_with = "sweep")]
    pub report: Option<PathBuf>,
}

/// One configuration of the synthetic experiment.
#[derive(Clone, Copy)]
struct Point {
    m: usize,
    n: usize,
    k: usize,
}

struct PointResult {
    error: f64,
    se: f64,
    runtime: f64,
    last: Option<ReportRecord>,
}

fn model_for(cmd: &SynthCmd, p: Point) -> CliResult<ClassModel> {
    let seed = cmd.train.seed;
    let mut model = gen_means(p.n, p.k, cmd.d, cmd.permute_support, seed)?;
    let cal = calibrate_variance(&mut model, cmd.ber, cmd.calib_samples, seed.wrapping_add(1))?;
    log::info!("N={} K={}: noise variance {:.4}, Bayes error {:.4}", p.n, p.k, cal.noise_var, cal.bayes_error);
    Ok(model)
}

fn as_count(v: f64, what: &str) -> CliResult<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        usage(format!("{what} sweep values must be positive integers, got {v}"))
    }
}

fn run_point(cmd: &SynthCmd, model: &ClassModel, p: Point, opts: &TrainOptions, run_id: &str) -> CliResult<PointResult> {
    let seed = cmd.train.seed;
    let mut errors = Vec::with_capacity(cmd.trials);
    let mut mc_var = 0.0;
    let mut runtime = 0.0;
    let mut last = None;
    for t in 0..cmd.trials as u64 {
        let ds = gen_dataset(model, p.m, seed.wrapping_add(2 + t))?;
        let mut trial_opts = opts.clone();
        trial_opts.config.seed = seed.wrapping_add(t);
        let fitted = fit(&ds, &trial_opts)?;
        let start = std::time::Instant::now();
        let est = expected_error(&fitted.result.weights, model, cmd.mc_samples, seed.wrapping_add(1000 + t))?;
        runtime += fitted.tuning + fitted.training;
        errors.push(est.error);
        mc_var += est.standard_error.powi(2);
        log::info!("M={} N={} K={} trial {}: error {:.4}", p.m, p.n, p.k, t + 1, est.error);

        let mut report = base_report(run_id.to_string(), &trial_opts, &fitted, descriptor(cmd, p));
        report.times.evaluation = start.elapsed().as_secs_f64();
        report.error_rate = Some(est.error);
        report.error_se = Some(est.standard_error);
        last = Some(report);
    }
    let count = errors.len() as f64;
    let error = errors.iter().sum::<f64>() / count;
    // Spread across trials when there are several, Monte Carlo error otherwise.
    let se = if errors.len() > 1 {
        (errors.iter().map(|e| (e - error).powi(2)).sum::<f64>() / (count - 1.0) / count).sqrt()
    } else {
        mc_var.sqrt()
    };
    Ok(PointResult { error, se, runtime: runtime / count, last })
}

fn descriptor(cmd: &SynthCmd, p: Point) -> DatasetDescriptor {
    DatasetDescriptor {
        source: format!("synthetic:N={},K={},D={},ber={}", p.n, p.k, cmd.d, cmd.ber),
        num_samples: p.m,
        num_features: p.n,
        num_classes: cmd.d,
        labels: class_labels(cmd.d).values().to_vec(),
        test_samples: None,
    }
}

fn class_labels(d: usize) -> LabelMap {
    LabelMap::from_values((1..=d).map(|c| c.to_string()).collect())
}

pub fn synth(cmd: &SynthCmd, run_id: String) -> CliResult<()> {
    let base = Point { m: cmd.m, n: cmd.n, k: cmd.k };
    if cmd.trials == 0 {
        return usage("--trials must be at least 1");
    }
    let opts = if cmd.no_train { None } else { Some(cmd.train.options()?) };
    if cmd.sweep == Some(Sweep::Lambda) {
        let fixed_msa = opts.as_ref().is_some_and(|o| o.config.mode == Mode::MinSum && o.config.tuner == Tuner::Fixed);
        if !fixed_msa {
            return usage("a lambda sweep needs --mode msa --tuner fixed");
        }
        if cmd.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return usage("lambda sweep values must be positive");
        }
    }
    if cmd.no_train && cmd.sweep.is_some() {
        return usage("--no-train cannot be combined with --sweep");
    }

    let model = model_for(cmd, base)?;
    if let Some(path) = &cmd.write {
        let ds = gen_dataset(&model, base.m, cmd.train.seed.wrapping_add(2))?;
        write_svmlight(path, &ds, &class_labels(cmd.d))?;
    }
    let Some(opts) = opts else { return Ok(()) };

    let Some(sweep) = cmd.sweep else {
        let res = run_point(cmd, &model, base, &opts, &run_id)?;
        let mut report = res.last.expect("at least one trial");
        report.error_rate = Some(res.error);
        report.error_se = Some(res.se);
        return emit(cmd.report.as_deref(), &report.to_json());
    };

    let mut table = csv::Writer::from_writer(vec![]);
    table.write_record(["value", "error", "se", "runtime"]).map_err(|e| CliError::Runtime(e.to_string()))?;
    for &v in &cmd.values {
        let mut p = base;
        let mut point_opts = opts.clone();
        let point_model = match sweep {
            Sweep::M => {
                p.m = as_count(v, "M")?;
                None
            }
            Sweep::N => {
                p.n = as_count(v, "N")?;
                Some(model_for(cmd, p)?)
            }
            Sweep::K => {
                p.k = as_count(v, "K")?;
                Some(model_for(cmd, p)?)
            }
            Sweep::Lambda => {
                point_opts.lambda = Some(v);
                None
            }
        };
        let res = run_point(cmd, point_model.as_ref().unwrap_or(&model), p, &point_opts, &run_id)?;
        table
            .write_record([v.to_string(), res.error.to_string(), res.se.to_string(), res.runtime.to_string()])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = table.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    emit(cmd.table.as_deref(), &String::from_utf8_lossy(&bytes))
}
