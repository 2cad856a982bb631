//! Scalar-variance hybrid GAMP engine.

use web_time::Instant;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::{Hyperparameters, InputDenoiser};
use crate::model::{Dataset, WeightMatrix};
use crate::output::{MomentMethod, OutputDenoiser, OutputEstimate, SampleContext};

/// Message-passing flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Sum-product: posterior means and variances.
    #[serde(rename = "spa")]
    SumProduct,
    /// Min-sum: MAP estimates.
    #[serde(rename = "msa")]
    MinSum,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spa" => Ok(Self::SumProduct),
            "msa" => Ok(Self::MinSum),
            other => Err(Error::InvalidInput(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SumProduct => "spa",
            Self::MinSum => "msa",
        })
    }
}

/// Prior hyperparameter tuning strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuner {
    Em,
    Sure,
    Fixed,
}

impl std::str::FromStr for Tuner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "em" => Ok(Self::Em),
            "sure" => Ok(Self::Sure),
            "fixed" => Ok(Self::Fixed),
            other => Err(Error::InvalidInput(format!("unknown tuner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GampConfig {
    pub mode: Mode,
    pub max_iters: usize,
    pub tol: f64,
    pub damping: f64,
    pub adaptive_damping: bool,
    pub seed: u64,
    pub moment_method: MomentMethod,
    pub tuner: Tuner,
}

impl Default for GampConfig {
    fn default() -> Self {
        Self {
            mode: Mode::MinSum,
            max_iters: 200,
            tol: 1e-5,
            damping: 0.3,
            adaptive_damping: false,
            seed: 0,
            moment_method: MomentMethod::Gm,
            tuner: Tuner::Sure,
        }
    }
}

impl GampConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidInput(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        match (self.mode, self.tuner) {
            (Mode::MinSum, Tuner::Em) => Err(Error::InvalidInput("the EM tuner requires sum-product mode".into())),
            (Mode::SumProduct, Tuner::Sure) => Err(Error::InvalidInput("the SURE tuner requires min-sum mode".into())),
            _ => Ok(()),
        }
    }
}

/// Engine state after an iteration.
#[derive(Debug, Clone)]
pub struct GampState {
    pub x_hat: Array2<f64>,
    /// Damped running average of `x̂`. It feeds `r̂`, and is what the engine returns.
    pub x_bar: Array2<f64>,
    pub r_hat: Array2<f64>,
    pub p_hat: Array2<f64>,
    pub z_hat: Array2<f64>,
    pub s_hat: Array2<f64>,
    /// Dual estimate used in the Onsager term of this iteration's `p̂`.
    pub s_hat_prev: Array2<f64>,
    pub q_x: f64,
    pub q_p: f64,
    pub q_r: f64,
    pub q_s: f64,
    pub q_z: Array2<f64>,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub q_x: f64,
    pub q_p: f64,
    pub q_r: f64,
    pub q_s: f64,
    pub relative_change: f64,
    pub damping: f64,
    pub hyperparameters: Hyperparameters,
    /// Samples whose Taylor moments broke down and used the mixture method.
    pub fallbacks: usize,
    /// Samples whose Newton solve hit the iteration cap.
    pub newton_unconverged: usize,
    pub tuner_seconds: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub weights: WeightMatrix,
    pub trace: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// `q_p = ‖A‖²_F q_x / M`.
pub fn forward_variance(q_x: f64, frobenius_sq: f64, num_samples: usize) -> f64 {
    frobenius_sq * q_x / num_samples as f64
}

/// Returns `(q_s, q_r)` from the per-entry score variances, after clamping
/// each `q_z` into `[1e-12 q_p, q_p]`.
pub fn backward_variances(q_p: f64, q_z: &Array2<f64>, num_features: usize, frobenius_sq: f64) -> Result<(f64, f64)> {
    backward_variances_at(q_p, q_z, num_features, frobenius_sq, 0)
}

fn backward_variances_at(
    q_p: f64,
    q_z: &Array2<f64>,
    num_features: usize,
    frobenius_sq: f64,
    iteration: usize,
) -> Result<(f64, f64)> {
    if !(q_p > 0.0) {
        return Err(Error::DegenerateVariance { iteration, what: format!("q_p = {q_p}") });
    }
    let lo = 1e-12 * q_p;
    let gap = q_z.iter().map(|&v| q_p - v.clamp(lo, q_p)).sum::<f64>() / q_z.len() as f64;
    let q_s = gap / (q_p * q_p);
    if !(q_s > 0.0) {
        return Err(Error::DegenerateVariance { iteration, what: format!("q_s = {q_s:e}") });
    }
    let q_s = q_s.max(1e-12 / q_p);
    Ok((q_s, num_features as f64 / (q_s * frobenius_sq)))
}

/// `θ·new + (1 − θ)·old`.
pub fn damp(new: &Array2<f64>, old: &Array2<f64>, theta: f64) -> Array2<f64> {
    if theta == 1.0 {
        return new.clone();
    }
    let mut out = new.clone();
    Zip::from(&mut out).and(old).for_each(|n, &o| *n = theta * *n + (1.0 - theta) * o);
    out
}

/// Step-size schedule: halve on a growing change, otherwise relax by 10%.
#[derive(Debug, Clone)]
pub struct DampingSchedule {
    theta: f64,
    adaptive: bool,
    previous_change: Option<f64>,
}

impl DampingSchedule {
    pub const FLOOR: f64 = 0.05;

    pub fn new(theta: f64, adaptive: bool) -> Self {
        Self { theta, adaptive, previous_change: None }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Feeds the latest relative change and returns the factor for the next
    /// iteration.
    pub fn observe(&mut self, change: f64) -> f64 {
        if self.adaptive {
            if let Some(prev) = self.previous_change {
                self.theta = if change > prev {
                    (self.theta * 0.5).max(Self::FLOOR)
                } else {
                    (self.theta * 1.1).min(1.0)
                };
            }
        }
        self.previous_change = Some(change);
        self.theta
    }
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn relative_change(new: &Array2<f64>, old: &Array2<f64>) -> f64 {
    let diff = new.iter().zip(old).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let base = frobenius(old);
    if base > 0.0 {
        diff / base
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn ensure_finite(a: &Array2<f64>, iteration: usize, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { iteration, what: what.to_string() })
    }
}

struct OutputStep {
    z_hat: Array2<f64>,
    q_z: Array2<f64>,
    fallbacks: usize,
    unconverged: usize,
}

fn output_step(
    dataset: &Dataset,
    p_hat: &Array2<f64>,
    q_p: f64,
    output: &dyn OutputDenoiser,
    iteration: usize,
    seed: u64,
) -> Result<OutputStep> {
    let (m, d) = p_hat.dim();
    let q = vec![q_p; d];
    let labels = dataset.labels();
    let one = |i: usize| -> Result<OutputEstimate> {
        let row: Vec<f64> = p_hat.row(i).to_vec();
        output.estimate(labels[i], &row, &q, SampleContext { iteration, sample: i, seed })
    };
    #[cfg(feature = "parallel")]
    let estimates: Vec<Result<OutputEstimate>> = {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let estimates: Vec<Result<OutputEstimate>> = (0..m).map(one).collect();

    let mut step = OutputStep { z_hat: Array2::zeros((m, d)), q_z: Array2::zeros((m, d)), fallbacks: 0, unconverged: 0 };
    for (i, est) in estimates.into_iter().enumerate() {
        let est = est.map_err(|e| match e {
            Error::DegenerateLikelihood(_) | Error::MethodBreakdown(_) => {
                Error::Divergence { iteration, what: format!("output step at sample {i}: {e}") }
            }
            other => other,
        })?;
        step.z_hat.row_mut(i).assign(&ndarray::ArrayView1::from(&est.z_hat));
        step.q_z.row_mut(i).assign(&ndarray::ArrayView1::from(&est.q_z));
        step.fallbacks += est.fell_back as usize;
        step.unconverged += est.not_converged as usize;
    }
    Ok(step)
}

/// Runs the engine to convergence or `max_iters`.
pub fn run(
    dataset: &Dataset,
    config: &GampConfig,
    input: &mut dyn InputDenoiser,
    output: &dyn OutputDenoiser,
) -> Result<TrainResult> {
    run_with_observer(dataset, config, input, output, &mut |_, _| {})
}

/// As [`run`], calling `observer` with the state and record after every
/// iteration.
pub fn run_with_observer(
    dataset: &Dataset,
    config: &GampConfig,
    input: &mut dyn InputDenoiser,
    output: &dyn OutputDenoiser,
    observer: &mut dyn FnMut(&GampState, &IterationRecord),
) -> Result<TrainResult> {
    config.validate()?;
    if input.mode() != config.mode || output.mode() != config.mode {
        return Err(Error::InvalidInput(format!(
            "denoisers ({}, {}) do not match mode {}",
            input.mode(),
            output.mode(),
            config.mode
        )));
    }
    let a = dataset.features();
    let (m, n, d) = (dataset.num_samples(), dataset.num_features(), dataset.num_classes());
    let frob = dataset.frobenius_sq();
    let (x0, q_x0) = input.initial_estimate(n, d);
    if frob == 0.0 {
        log::warn!("feature matrix is identically zero; returning the prior mean");
        return Ok(TrainResult { weights: WeightMatrix::new(x0)?, trace: vec![], iterations_run: 0, converged: true });
    }
    let q_x_floor = 1e-12 * q_x0;

    // start-up half step: scores from the prior mean with a zero dual
    let q_p = forward_variance(q_x0, frob, m);
    let p_hat = a.mul(x0.view());
    let out = output_step(dataset, &p_hat, q_p, output, 0, config.seed)?;
    let (q_s, q_r) = backward_variances_at(q_p, &out.q_z, n, frob, 0)?;
    let s_hat = (&out.z_hat - &p_hat) / q_p;
    let r_hat = &x0 + &(a.tmul(s_hat.view()) * q_r);
    let mut state = GampState {
        x_bar: x0.clone(),
        x_hat: x0,
        r_hat,
        p_hat,
        z_hat: out.z_hat,
        s_hat_prev: Array2::zeros((m, d)),
        s_hat,
        q_x: q_x0,
        q_p,
        q_r,
        q_s,
        q_z: out.q_z,
        iteration: 0,
    };
    ensure_finite(&state.r_hat, 0, "r_hat")?;

    let mut schedule = DampingSchedule::new(config.damping, config.adaptive_damping);
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut converged = false;
    for t in 1..=config.max_iters {
        let started = Instant::now();
        let theta = schedule.theta();

        let tune_start = Instant::now();
        input.tune_before(&state.r_hat, state.q_r)?;
        let mut tuner_seconds = tune_start.elapsed().as_secs_f64();
        let est = input.denoise(&state.r_hat, state.q_r)?;
        let tune_start = Instant::now();
        input.tune_after(&state.r_hat, state.q_r)?;
        tuner_seconds += tune_start.elapsed().as_secs_f64();

        let x_new = est.x_hat;
        ensure_finite(&x_new, t, "x_hat")?;
        let x_bar = damp(&x_new, &state.x_bar, theta);
        let change = relative_change(&x_bar, &state.x_bar);
        let q_x = (est.q_x_entries.sum() / est.q_x_entries.len() as f64).max(q_x_floor);
        if !q_x.is_finite() {
            return Err(Error::Divergence { iteration: t, what: "q_x".into() });
        }

        let q_p = forward_variance(q_x, frob, m);
        if !(q_p > 0.0) {
            return Err(Error::DegenerateVariance { iteration: t, what: format!("q_p = {q_p}") });
        }
        let s_prev = state.s_hat.clone();
        let p_hat = a.mul(x_new.view()) - &(&s_prev * q_p);
        ensure_finite(&p_hat, t, "p_hat")?;
        let out = output_step(dataset, &p_hat, q_p, output, t, config.seed)?;
        let (q_s_new, _) = backward_variances_at(q_p, &out.q_z, n, frob, t)?;
        let q_s = theta * q_s_new + (1.0 - theta) * state.q_s;
        let q_r = n as f64 / (q_s * frob);
        let s_new = (&out.z_hat - &p_hat) / q_p;
        let s_hat = damp(&s_new, &s_prev, theta);
        ensure_finite(&s_hat, t, "s_hat")?;
        let r_hat = &x_bar + &(a.tmul(s_hat.view()) * q_r);
        ensure_finite(&r_hat, t, "r_hat")?;

        state = GampState {
            x_hat: x_new,
            x_bar,
            r_hat,
            p_hat,
            z_hat: out.z_hat,
            s_hat,
            s_hat_prev: s_prev,
            q_x,
            q_p,
            q_r,
            q_s,
            q_z: out.q_z,
            iteration: t,
        };
        schedule.observe(change);
        let record = IterationRecord {
            iteration: t,
            q_x,
            q_p,
            q_r,
            q_s,
            relative_change: change,
            damping: theta,
            hyperparameters: input.hyperparameters(),
            fallbacks: out.fallbacks,
            newton_unconverged: out.unconverged,
            tuner_seconds,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        if out.fallbacks > 0 {
            log::debug!("iteration {t}: {} Taylor breakdowns replaced by the mixture method", out.fallbacks);
        }
        if out.unconverged > 0 {
            log::warn!("iteration {t}: {} Newton solves hit the iteration cap", out.unconverged);
        }
        observer(&state, &record);
        trace.push(record);
        if t > 1 && change < config.tol {
            converged = true;
            break;
        }
    }
    let iterations_run = trace.len();
    Ok(TrainResult { weights: WeightMatrix::new(state.x_bar)?, trace, iterations_run, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::{InputEstimate, Laplacian};
    use crate::output::MinSum;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_variance_examples() {
        assert_eq!(forward_variance(0.0, 5.0, 3), 0.0);
        assert_eq!(forward_variance(3.0, 2.0 * 7.0, 7), 6.0);
        assert_eq!(forward_variance(1.0, 9.0, 9), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array2::from_shape_fn((13, 6), |_| rng.random_range(-1.0..1.0));
        let frob: f64 = a.iter().map(|v| v * v).sum();
        let mut direct = 0.0;
        for i in 0..13 {
            for j in 0..6 {
                direct += a[[i, j]] * a[[i, j]] * 0.7;
            }
        }
        direct /= 13.0;
        assert!((forward_variance(0.7, frob, 13) - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn backward_variance_examples() {
        let q_p = 0.5;
        let full = Array2::from_elem((3, 2), q_p);
        assert!(matches!(backward_variances(q_p, &full, 4, 2.0), Err(Error::DegenerateVariance { .. })));
        let zero = Array2::zeros((3, 2));
        let (q_s, q_r) = backward_variances(q_p, &zero, 4, 2.0).unwrap();
        // q_z clamps up to 1e-12 q_p
        assert!((q_s - 1.0 / q_p).abs() <= 1e-11 / q_p);
        assert!((q_r - 4.0 * q_p / 2.0).abs() <= 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q_z = Array2::from_shape_fn((7, 3), |_| rng.random_range(0.01..0.49));
        let mut direct = 0.0;
        for i in 0..7 {
            for j in 0..3 {
                direct += 1.0 / q_p - q_z[[i, j]] / (q_p * q_p);
            }
        }
        direct /= 21.0;
        let (q_s, _) = backward_variances(q_p, &q_z, 4, 2.0).unwrap();
        assert!((q_s - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn damping_examples() {
        let old = Array2::zeros((2, 2));
        let new = Array2::from_elem((2, 2), 2.0);
        assert_eq!(damp(&new, &old, 1.0), new);
        assert_eq!(damp(&new, &old, 0.5), Array2::from_elem((2, 2), 1.0));
    }

    #[test]
    fn adaptive_schedule_reacts_to_oscillation() {
        let mut s = DampingSchedule::new(1.0, true);
        assert_eq!(s.observe(1.0), 1.0);
        assert_eq!(s.observe(2.0), 0.5);
        assert_eq!(s.observe(3.0), 0.25);
        assert!((s.observe(1.0) - 0.275).abs() < 1e-15);
        let mut up = 1.0;
        for _ in 0..10 {
            up *= 2.0;
            s.observe(up);
        }
        assert_eq!(s.theta(), DampingSchedule::FLOOR);
        let mut down = 1.0;
        for _ in 0..200 {
            down *= 0.9;
            s.observe(down);
        }
        assert_eq!(s.theta(), 1.0);
        let mut fixed = DampingSchedule::new(0.3, false);
        fixed.observe(1.0);
        assert_eq!(fixed.observe(5.0), 0.3);
    }

    #[test]
    fn config_validation() {
        let ok = GampConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GampConfig { damping: 0.0, ..ok.clone() },
            GampConfig { damping: 1.5, ..ok.clone() },
            GampConfig { tol: 0.0, ..ok.clone() },
            GampConfig { max_iters: 0, ..ok.clone() },
            GampConfig { tuner: Tuner::Em, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    /// Returns its input unchanged with unit variance.
    struct Identity;

    impl InputDenoiser for Identity {
        fn mode(&self) -> Mode {
            Mode::MinSum
        }
        fn initial_estimate(&self, n: usize, d: usize) -> (Array2<f64>, f64) {
            (Array2::zeros((n, d)), 1.0)
        }
        fn denoise(&mut self, r: &Array2<f64>, _q: f64) -> Result<InputEstimate> {
            Ok(InputEstimate { x_hat: r.clone(), q_x_entries: Array2::from_elem(r.dim(), 1.0) })
        }
        fn hyperparameters(&self) -> Hyperparameters {
            Hyperparameters::None
        }
    }

    /// Returns `p̂` as the score estimate, i.e. an uninformative likelihood.
    struct Flat;

    impl OutputDenoiser for Flat {
        fn mode(&self) -> Mode {
            Mode::MinSum
        }
        fn estimate(&self, _y: usize, p: &[f64], q: &[f64], _c: SampleContext) -> Result<OutputEstimate> {
            Ok(OutputEstimate { z_hat: p.to_vec(), q_z: vec![0.5 * q[0]; p.len()], ..Default::default() })
        }
    }

    fn small_dataset(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((30, 8), |_| rng.random_range(-1.0..1.0));
        let labels = (0..30).map(|i| i % 3).collect();
        Dataset::dense(a, labels, 3).unwrap()
    }

    #[test]
    fn zero_features_return_prior_mean() {
        let ds = Dataset::dense(Array2::zeros((5, 4)), vec![0, 1, 2, 0, 1], 3).unwrap();
        let mut input = Laplacian::fixed(1.0).unwrap();
        let res = run(&ds, &GampConfig { tuner: Tuner::Fixed, ..Default::default() }, &mut input, &MinSum::default()).unwrap();
        assert!(res.weights.as_array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fixed_point_is_preserved() {
        // with a flat likelihood ŝ stays zero, so r̂ = x̂ and the identity
        // denoiser keeps x̂ exactly where it started
        let ds = small_dataset(4);
        let mut input = Identity;
        let cfg = GampConfig { tuner: Tuner::Fixed, max_iters: 5, ..Default::default() };
        let mut states = vec![];
        run_with_observer(&ds, &cfg, &mut input, &Flat, &mut |s, _| states.push(s.x_hat.clone())).unwrap();
        assert!(states.iter().all(|x| x.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn onsager_and_variance_identities_hold() {
        let ds = small_dataset(5);
        let mut input = Laplacian::fixed(2.0).unwrap();
        let cfg = GampConfig { tuner: Tuner::Fixed, max_iters: 15, tol: 1e-12, ..Default::default() };
        let frob = ds.frobenius_sq();
        let a = ds.features().to_dense();
        let mut checked = 0;
        run_with_observer(&ds, &cfg, &mut input, &MinSum::default(), &mut |s, r| {
            let expect = a.dot(&s.x_hat) - &(&s.s_hat_prev * s.q_p);
            let err = relative_change(&s.p_hat, &expect);
            assert!(err <= 1e-10, "Onsager error {err}");
            assert!((s.q_p - frob * s.q_x / 30.0).abs() <= 1e-12 * s.q_p);
            assert!((s.q_r - 8.0 / (s.q_s * frob)).abs() <= 1e-12 * s.q_r);
            assert_eq!(r.q_p, s.q_p);
            checked += 1;
        })
        .unwrap();
        assert!(checked > 0);
    }

    #[test]
    fn undamped_dual_variance_follows_output_step() {
        let ds = small_dataset(8);
        let mut input = Laplacian::fixed(2.0).unwrap();
        let cfg = GampConfig { tuner: Tuner::Fixed, damping: 1.0, max_iters: 8, tol: 1e-12, ..Default::default() };
        let frob = ds.frobenius_sq();
        run_with_observer(&ds, &cfg, &mut input, &MinSum::default(), &mut |s, _| {
            let (q_s, _) = backward_variances(s.q_p, &s.q_z, 8, frob).unwrap();
            assert!((s.q_s - q_s).abs() <= 1e-12 * q_s);
            assert_eq!(s.x_bar, s.x_hat);
        })
        .unwrap();
    }

    #[test]
    fn prior_mean_after_one_step_is_not_convergence() {
        let ds = small_dataset(9);
        let mut input = Laplacian::fixed(40.0).unwrap();
        let cfg = GampConfig { tuner: Tuner::Fixed, ..Default::default() };
        let res = run(&ds, &cfg, &mut input, &MinSum::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations_run >= 2);
        assert!(res.weights.as_array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn runs_are_bit_identical() {
        let ds = small_dataset(6);
        let cfg = GampConfig { max_iters: 10, ..Default::default() };
        let go = || {
            let mut input = Laplacian::sure(1.0, 3).unwrap();
            run(&ds, &cfg, &mut input, &MinSum::default()).unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a.weights, b.weights);
        let strip = |t: &[IterationRecord]| {
            t.iter().map(|r| (r.q_x, r.q_p, r.q_r, r.q_s, r.relative_change, r.hyperparameters.clone())).collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.trace), strip(&b.trace));
    }

    #[test]
    fn mismatched_modes_rejected() {
        let ds = small_dataset(7);
        let mut input = Laplacian::fixed(1.0).unwrap();
        let cfg = GampConfig { mode: Mode::SumProduct, tuner: Tuner::Fixed, ..Default::default() };
        assert!(matches!(run(&ds, &cfg, &mut input, &MinSum::default()), Err(Error::InvalidInput(_))));
    }
}
