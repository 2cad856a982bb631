//! Matched synthetic benchmark: sparse orthonormal class means, isotropic
//! Gaussian features calibrated to a target Bayes error, and the expected
//! test error of a weight matrix under that model.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, Dataset, WeightMatrix};

const CHUNK: usize = 1 << 14;

/// Class-conditional model `a | y ~ N(μ_y, v I)`.
#[derive(Debug, Clone)]
pub struct ClassModel {
    /// `N × D`, orthonormal columns supported on `support`.
    pub means: Array2<f64>,
    pub noise_var: f64,
    pub sparsity: usize,
    pub support: Vec<usize>,
    /// Calibrated Bayes error and its Monte Carlo standard error.
    pub bayes_error: Option<(f64, f64)>,
}

impl ClassModel {
    pub fn num_features(&self) -> usize {
        self.means.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.means.ncols()
    }

    /// Weights equivalent to the Bayes (nearest-mean) classifier.
    pub fn bayes_weights(&self) -> WeightMatrix {
        WeightMatrix::new(&self.means / self.noise_var.max(f64::MIN_POSITIVE)).expect("finite means")
    }
}

/// Draws `D` orthonormal `K`-sparse class means in `N` dimensions.
///
/// The left singular vectors of a `K × K` standard normal matrix, ordered by
/// singular value, are zero-padded to length `N`. The support is rows
/// `0..K`, or a seeded random `K`-subset when `permute_support` is set.
pub fn gen_means(n: usize, k: usize, d: usize, permute_support: bool, seed: u64) -> Result<ClassModel> {
    if d == 0 || k < d {
        return Err(Error::InvalidInput(format!("need K >= D >= 1 for orthonormal means, got K={k}, D={d}")));
    }
    if n < k {
        return Err(Error::InvalidInput(format!("need N >= K, got N={n}, K={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: DMatrix<f64> = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let svd = g.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..k).collect();
    let sv = &svd.singular_values;
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let support: Vec<usize> = if permute_support {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let mut chosen = rows[..k].to_vec();
        chosen.sort_unstable();
        chosen
    } else {
        (0..k).collect()
    };
    let mut means = Array2::zeros((n, d));
    for (col, &src) in order.iter().take(d).enumerate() {
        for (row, &target) in support.iter().enumerate() {
            means[[target, col]] = u[(row, src)];
        }
    }
    Ok(ClassModel { means, noise_var: 1.0, sparsity: k, support, bayes_error: None })
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Sums `f(rng, count)` over fixed-size chunks with per-chunk streams, so
/// the result does not depend on the thread count.
fn chunked<T, F>(total: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    let one = |c: usize| f(&mut chunk_rng(seed, c), CHUNK.min(total - c * CHUNK));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(one).collect()
    }
}

/// Outcome of the noise-variance calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub noise_var: f64,
    pub bayes_error: f64,
    pub standard_error: f64,
    pub iterations: usize,
}

/// Common random numbers for the nearest-mean error: with orthonormal means
/// the decision depends only on `g = Mᵀw ~ N(0, I_D)`.
struct BerDraws {
    d: usize,
    labels: Vec<usize>,
    g: Vec<f64>,
}

impl BerDraws {
    fn new(d: usize, per_class: usize, seed: u64) -> Self {
        let total = d * per_class;
        let g: Vec<f64> = chunked(total, seed, |rng, count| {
            (0..count * d).map(|_| StandardNormal.sample(rng)).collect::<Vec<f64>>()
        })
        .concat();
        Self { d, labels: (0..total).map(|i| i % d).collect(), g }
    }

    /// Error indicator of `argmax(e_y + √v g) ≠ y`, ties counted as errors.
    fn error_rate(&self, v: f64) -> (f64, f64) {
        let sd = v.sqrt();
        let n = self.labels.len();
        let errors = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(i, &y)| {
                let g = &self.g[i * self.d..(i + 1) * self.d];
                let own = 1.0 + sd * g[y];
                (0..self.d).any(|k| k != y && sd * g[k] >= own)
            })
            .count();
        let p = errors as f64 / n as f64;
        (p, (p * (1.0 - p) / n as f64).sqrt())
    }
}

/// Nearest-mean error of the model at noise variance `v`, by Monte Carlo.
pub fn bayes_error(num_classes: usize, v: f64, per_class: usize, seed: u64) -> (f64, f64) {
    BerDraws::new(num_classes, per_class, seed).error_rate(v)
}

/// Bisects `ln v` until the Monte Carlo Bayes error is within 0.002 of the
/// target (or 40 steps), reusing one set of draws for every `v`.
pub fn calibrate_variance(model: &mut ClassModel, target: f64, per_class: usize, seed: u64) -> Result<Calibration> {
    let d = model.num_classes();
    let ceiling = (d as f64 - 1.0) / d as f64;
    if !(target > 0.0 && target < ceiling) {
        return Err(Error::InvalidInput(format!("target Bayes error must lie in (0, {ceiling:.4}), got {target}")));
    }
    if per_class == 0 {
        return Err(Error::InvalidInput("calibration needs at least one sample per class".into()));
    }
    let draws = BerDraws::new(d, per_class, seed);
    let (mut lo, mut hi) = (-12.0_f64, 12.0_f64);
    while draws.error_rate(lo.exp()).0 > target && lo > -200.0 {
        lo -= 12.0;
    }
    while draws.error_rate(hi.exp()).0 < target && hi < 200.0 {
        hi += 12.0;
    }
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    let mut iterations = 0;
    for _ in 0..40 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (ber, se) = draws.error_rate(mid.exp());
        if (ber - target).abs() < best.0 {
            best = ((ber - target).abs(), mid.exp(), ber, se);
        }
        if (ber - target).abs() < 0.002 {
            break;
        }
        if ber < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, v, ber, se) = best;
    model.noise_var = v;
    model.bayes_error = Some((ber, se));
    Ok(Calibration { noise_var: v, bayes_error: ber, standard_error: se, iterations })
}

/// Balanced dataset: `M/D` samples of each class, labels cycling `0, 1, …`.
pub fn gen_dataset(model: &ClassModel, m: usize, seed: u64) -> Result<Dataset> {
    let (n, d) = model.means.dim();
    if m == 0 || m % d != 0 {
        return Err(Error::InvalidInput(format!("M={m} must be a positive multiple of D={d}")));
    }
    let sd = model.noise_var.sqrt();
    let rows: Vec<f64> = chunked(m, seed, |rng, count| {
        let mut out = Vec::with_capacity(count * n);
        for _ in 0..count {
            for _ in 0..n {
                let g: f64 = StandardNormal.sample(rng);
                out.push(sd * g);
            }
        }
        out
    })
    .concat();
    let labels: Vec<usize> = (0..m).map(|i| i % d).collect();
    let mut a = Array2::from_shape_vec((m, n), rows).expect("row-major samples");
    for (i, &y) in labels.iter().enumerate() {
        let mut row = a.row_mut(i);
        row += &model.means.column(y);
    }
    Dataset::dense(a, labels, d)
}

/// Expected misclassification probability with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub error: f64,
    pub standard_error: f64,
}

/// `1 − (1/D) Σ_y Pr{x̂_yᵀa > x̂_dᵀa ∀ d ≠ y | y}` for a fresh sample of the
/// model, via common Gaussian draws of the projected noise `X̂ᵀ(a − μ_y)`.
pub fn expected_error(weights: &WeightMatrix, model: &ClassModel, samples: usize, seed: u64) -> Result<ErrorEstimate> {
    let x = weights.as_array();
    let (n, d) = model.means.dim();
    if x.dim() != (n, d) {
        return Err(Error::DimensionMismatch(format!("weights {:?} vs model {n}x{d}", x.dim())));
    }
    if samples < 2 {
        return Err(Error::InvalidInput("expected error needs at least 2 samples".into()));
    }
    // correct for y iff (x̂_y − x̂_k)ᵀ(μ_y + a) > 0 for all k ≠ y; a enters only
    // through its projection onto the column space of X̂, a = √v Q g
    let q = DMatrix::from_fn(n, d, |i, j| x[[i, j]]).qr().q();
    let rank = q.ncols();
    let sd = model.noise_var.sqrt();
    let mut offset = vec![0.0; d * d];
    let mut coef = vec![0.0; d * d * rank];
    for y in 0..d {
        for k in 0..d {
            let diff: Vec<f64> = (0..n).map(|i| x[[i, y]] - x[[i, k]]).collect();
            offset[y * d + k] = (0..n).map(|i| diff[i] * model.means[[i, y]]).sum();
            for j in 0..rank {
                coef[(y * d + k) * rank + j] = sd * (0..n).map(|i| diff[i] * q[(i, j)]).sum::<f64>();
            }
        }
    }
    let sums: Vec<(f64, f64)> = chunked(samples, seed, |rng, count| {
        let mut g = vec![0.0; rank];
        let (mut acc, mut acc2) = (0.0, 0.0);
        for _ in 0..count {
            g.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
            let correct = (0..d)
                .filter(|&y| {
                    (0..d).all(|k| {
                        let pair = y * d + k;
                        let c = &coef[pair * rank..(pair + 1) * rank];
                        k == y || offset[pair] + c.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() > 0.0
                    })
                })
                .count();
            let err = 1.0 - correct as f64 / d as f64;
            acc += err;
            acc2 += err * err;
        }
        (acc, acc2)
    });
    let (total, total2) = sums.iter().fold((0.0, 0.0), |(a, b), (c, e)| (a + c, b + e));
    let nf = samples as f64;
    let mean = total / nf;
    let var = ((total2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(ErrorEstimate { error: mean.clamp(0.0, 1.0), standard_error: (var / nf).sqrt() })
}

/// Closed form of [`expected_error`] for two classes.
pub fn expected_error_two_class(weights: &WeightMatrix, model: &ClassModel) -> Result<f64> {
    let x = weights.as_array();
    if x.ncols() != 2 || model.num_classes() != 2 || x.nrows() != model.num_features() {
        return Err(Error::DimensionMismatch("two-class closed form needs D = 2 and matching N".into()));
    }
    let w = &x.column(0) - &x.column(1);
    let norm = w.dot(&w).sqrt() * model.noise_var.sqrt();
    if norm == 0.0 {
        return Ok(1.0);
    }
    let m1 = w.dot(&model.means.column(0)) / norm;
    let m2 = w.dot(&model.means.column(1)) / norm;
    Ok(1.0 - 0.5 * (crate::normal::cdf(m1) + crate::normal::cdf(-m2)))
}

/// Empirical error of the nearest-mean rule on a dataset.
pub fn nearest_mean_error(model: &ClassModel, data: &Dataset) -> f64 {
    let a = data.features().to_dense();
    let scores = a.dot(&model.means);
    let wrong = data
        .labels()
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(&scores.row(i).to_vec()) != y)
        .count();
    wrong as f64 / data.num_samples() as f64
}
