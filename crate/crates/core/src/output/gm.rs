//! Gaussian-cdf mixture approximation of the soft-max likelihood and the
//! moment computation built on it.
//!
//! In difference coordinates `γ_k = z_y − z_k` the likelihood is
//! `l(γ) = 1 / (1 + Σ_k exp(−γ_k))`, approximated by
//! `Σ_l α_l Π_k Φ((γ_k − μ_l)/σ_l)`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_message, MomentResult};
use crate::error::{Error, Result};
use crate::normal;

const GRID_HALF_WIDTH: f64 = 8.0;
const MAX_GRID_POINTS: usize = 100_000;
const FIT_LIMIT: f64 = 0.2;
const STARTS: u64 = 5;

/// Fitted mixture parameters for a given number of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct GmLikApprox {
    pub num_classes: usize,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Sup-norm residual over the fit grid.
    pub fit_error: f64,
}

impl GmLikApprox {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// Mixture value at a difference vector `γ` of length `D − 1`.
    pub fn eval(&self, gamma: &[f64]) -> f64 {
        (0..self.components())
            .map(|l| {
                self.weights[l]
                    * gamma.iter().map(|&g| normal::cdf((g - self.means[l]) / self.scales[l])).product::<f64>()
            })
            .sum()
    }
}

/// Exact soft-max likelihood in difference coordinates.
pub fn softmax_difference_likelihood(gamma: &[f64]) -> f64 {
    // 1 / (1 + Σ e^{−γ_k}) evaluated as exp(−logsumexp(0, −γ))
    let max = gamma.iter().map(|&g| -g).fold(0.0_f64, f64::max);
    let total = (-max).exp() + gamma.iter().map(|&g| (-g - max).exp()).sum::<f64>();
    (-max - total.ln()).exp()
}

/// Evaluation grid over `[−8, 8]^(D−1)`.
#[derive(Debug, Clone)]
pub struct FitGrid {
    pub nodes: Vec<f64>,
    pub dims: usize,
    /// Row-major node indices, `dims` per point.
    pub points: Vec<u16>,
    pub subsampled: bool,
}

impl FitGrid {
    /// Full product grid when it fits in the point budget, otherwise a seeded
    /// uniform subsample of grid tuples.
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidInput("the mixture fit needs at least 2 classes".into()));
        }
        let dims = num_classes - 1;
        let per_dim = ((MAX_GRID_POINTS as f64).powf(1.0 / dims as f64).floor() as usize).clamp(17, 2001);
        let nodes: Vec<f64> = (0..per_dim)
            .map(|j| -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * j as f64 / (per_dim - 1) as f64)
            .collect();
        let full = (per_dim as f64).powi(dims as i32);
        let mut points = Vec::new();
        let subsampled = full > MAX_GRID_POINTS as f64;
        if subsampled {
            let mut rng = ChaCha8Rng::seed_from_u64(0x6d69_7874);
            points.reserve(MAX_GRID_POINTS * dims);
            for _ in 0..MAX_GRID_POINTS * dims {
                points.push(rng.random_range(0..per_dim) as u16);
            }
        } else {
            let total = full as usize;
            points.reserve(total * dims);
            let mut idx = vec![0usize; dims];
            for _ in 0..total {
                points.extend(idx.iter().map(|&i| i as u16));
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < per_dim {
                        break;
                    }
                    *slot = 0;
                }
            }
        }
        Ok(Self { nodes, dims, points, subsampled })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn point(&self, i: usize) -> &[u16] {
        &self.points[i * self.dims..(i + 1) * self.dims]
    }

    pub fn describe(&self) -> String {
        format!(
            "nodes={} range=[-{GRID_HALF_WIDTH},{GRID_HALF_WIDTH}] dims={} points={} subsampled={}",
            self.nodes.len(),
            self.dims,
            self.len(),
            self.subsampled
        )
    }
}

/// Unconstrained parameterization: `α = softmax(a)`, `σ = exp(s)`.
#[derive(Debug, Clone)]
struct Params {
    a: Vec<f64>,
    mu: Vec<f64>,
    s: Vec<f64>,
}

impl Params {
    fn len(&self) -> usize {
        self.a.len()
    }

    fn to_vec(&self) -> Vec<f64> {
        self.a.iter().chain(&self.mu).chain(&self.s).copied().collect()
    }

    fn from_slice(v: &[f64]) -> Self {
        let l = v.len() / 3;
        Self { a: v[..l].to_vec(), mu: v[l..2 * l].to_vec(), s: v[2 * l..].to_vec() }
    }

    fn weights(&self) -> Vec<f64> {
        super::softmax(&self.a)
    }
}

struct Tables {
    cdf: Vec<Vec<f64>>,
    pdf: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

fn tables(grid: &FitGrid, p: &Params) -> Tables {
    let l = p.len();
    let mut t = Tables { cdf: vec![vec![]; l], pdf: vec![vec![]; l], u: vec![vec![]; l] };
    for c in 0..l {
        let sigma = p.s[c].exp();
        for &g in &grid.nodes {
            let u = (g - p.mu[c]) / sigma;
            t.cdf[c].push(normal::cdf(u));
            t.pdf[c].push(normal::pdf(u));
            t.u[c].push(u);
        }
    }
    t
}

struct Eval {
    ssr: f64,
    sup: f64,
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
}

fn evaluate(grid: &FitGrid, targets: &[f64], p: &Params, with_jacobian: bool) -> Eval {
    let l = p.len();
    let np = 3 * l;
    let alpha = p.weights();
    let t = tables(grid, p);
    let dims = grid.dims;
    let mut jtj = DMatrix::zeros(np, np);
    let mut jtr = DVector::zeros(np);
    let mut ssr = 0.0;
    let mut sup = 0.0_f64;
    let mut prod = vec![0.0; l];
    let mut prefix = vec![0.0; dims + 1];
    let mut suffix = vec![0.0; dims + 1];
    let mut row = vec![0.0; np];
    for i in 0..grid.len() {
        let pt = grid.point(i);
        let mut fit = 0.0;
        for c in 0..l {
            prod[c] = pt.iter().map(|&j| t.cdf[c][j as usize]).product();
            fit += alpha[c] * prod[c];
        }
        let r = fit - targets[i];
        ssr += r * r;
        sup = sup.max(r.abs());
        if !with_jacobian {
            continue;
        }
        for c in 0..l {
            row[c] = alpha[c] * (prod[c] - fit);
            prefix[0] = 1.0;
            for k in 0..dims {
                prefix[k + 1] = prefix[k] * t.cdf[c][pt[k] as usize];
            }
            suffix[dims] = 1.0;
            for k in (0..dims).rev() {
                suffix[k] = suffix[k + 1] * t.cdf[c][pt[k] as usize];
            }
            let sigma = p.s[c].exp();
            let (mut dmu, mut ds) = (0.0, 0.0);
            for k in 0..dims {
                let j = pt[k] as usize;
                let others = prefix[k] * suffix[k + 1];
                dmu -= t.pdf[c][j] / sigma * others;
                ds -= t.pdf[c][j] * t.u[c][j] * others;
            }
            row[l + c] = alpha[c] * dmu;
            row[2 * l + c] = alpha[c] * ds;
        }
        for a in 0..np {
            jtr[a] += row[a] * r;
            for b in a..np {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..np {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    Eval { ssr, sup, jtj, jtr }
}

fn levenberg_marquardt(grid: &FitGrid, targets: &[f64], start: Params) -> (Params, Eval) {
    let mut p = start;
    let mut cur = evaluate(grid, targets, &p, true);
    let mut damping = 1e-3;
    for _ in 0..300 {
        let n = cur.jtr.len();
        let mut improved = false;
        while damping < 1e12 {
            let mut lhs = cur.jtj.clone();
            for a in 0..n {
                lhs[(a, a)] += damping * cur.jtj[(a, a)].max(1e-12);
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&cur.jtr));
            let mut v = p.to_vec();
            v.iter_mut().zip(step.iter()).for_each(|(x, d)| *x += d);
            let cand = Params::from_slice(&v);
            let trial = evaluate(grid, targets, &cand, false);
            if trial.ssr.is_finite() && trial.ssr < cur.ssr {
                let rel = (cur.ssr - trial.ssr) / cur.ssr.max(1e-300);
                p = cand;
                cur = evaluate(grid, targets, &p, true);
                damping = (damping * 0.3).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, cur)
}

/// Fits the mixture to the soft-max likelihood on the given grid.
///
/// Multi-start Levenberg-Marquardt: five seeded random starts plus, for
/// `L > 1`, the `L − 1` solution extended by a negligible component.
pub fn fit_softmax_gm_approx(num_classes: usize, components: usize, grid: &FitGrid) -> Result<GmLikApprox> {
    if num_classes < 2 || components < 1 {
        return Err(Error::InvalidInput(format!(
            "mixture fit needs D >= 2 and L >= 1, got D={num_classes}, L={components}"
        )));
    }
    if grid.dims != num_classes - 1 {
        return Err(Error::DimensionMismatch(format!("grid has {} dims, need {}", grid.dims, num_classes - 1)));
    }
    let targets: Vec<f64> = (0..grid.len())
        .map(|i| {
            let g: Vec<f64> = grid.point(i).iter().map(|&j| grid.nodes[j as usize]).collect();
            softmax_difference_likelihood(&g)
        })
        .collect();
    let mut starts = Vec::new();
    if components > 1 {
        let inner = fit_softmax_gm_approx(num_classes, components - 1, grid)?;
        let mut a: Vec<f64> = inner.weights.iter().map(|w| w.max(1e-300).ln()).collect();
        a.push(a.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 12.0);
        let mut mu = inner.means.clone();
        mu.push(0.0);
        let mut s: Vec<f64> = inner.scales.iter().map(|v| v.ln()).collect();
        s.push(0.5);
        starts.push(Params { a, mu, s });
    }
    for seed in 0..STARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        starts.push(Params {
            a: (0..components).map(|_| rng.random_range(-1.0..1.0)).collect(),
            mu: (0..components).map(|_| rng.random_range(-1.0..3.0)).collect(),
            s: (0..components).map(|_| rng.random_range(0.5f64.ln()..3f64.ln())).collect(),
        });
    }
    let mut best: Option<(Params, Eval)> = None;
    for start in starts {
        let (p, e) = levenberg_marquardt(grid, &targets, start);
        if best.as_ref().is_none_or(|(_, b)| e.ssr < b.ssr) {
            best = Some((p, e));
        }
    }
    let (p, e) = best.expect("at least one start");
    if !(e.sup <= FIT_LIMIT) {
        return Err(Error::FitFailed { residual: e.sup, limit: FIT_LIMIT });
    }
    Ok(GmLikApprox {
        num_classes,
        weights: p.weights(),
        means: p.mu.clone(),
        scales: p.s.iter().map(|s| s.exp()).collect(),
        fit_error: e.sup,
    })
}

/// Fit cache: in-process memo plus optional on-disk text records.
///
/// Each file `softmax-gm-D{D}-L{L}.txt` holds `key value...` lines:
/// `classes`, `components`, `weights`, `means`, `scales`, `fit_error`, `grid`.
#[derive(Debug, Default)]
pub struct GmLikCache {
    dir: Option<PathBuf>,
    memo: Mutex<HashMap<(usize, usize), Arc<GmLikApprox>>>,
}

impl GmLikCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()), memo: Mutex::default() }
    }

    /// Process-wide cache honoring `SHYGAMP_CACHE_DIR` when set.
    pub fn global() -> &'static GmLikCache {
        static CACHE: std::sync::OnceLock<GmLikCache> = std::sync::OnceLock::new();
        CACHE.get_or_init(|| match std::env::var_os("SHYGAMP_CACHE_DIR") {
            Some(dir) => GmLikCache::with_dir(dir),
            None => GmLikCache::in_memory(),
        })
    }

    pub fn path_for(dir: &Path, num_classes: usize, components: usize) -> PathBuf {
        dir.join(format!("softmax-gm-D{num_classes}-L{components}.txt"))
    }

    pub fn get(&self, num_classes: usize, components: usize) -> Result<Arc<GmLikApprox>> {
        let key = (num_classes, components);
        if let Some(hit) = self.memo.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let approx = match self.dir.as_deref().map(|d| Self::path_for(d, num_classes, components)) {
            Some(path) if path.exists() => match read_record(&path) {
                Ok(a) if a.num_classes == num_classes && a.components() == components => a,
                _ => {
                    log::warn!("ignoring unreadable fit cache {}", path.display());
                    self.fit_and_store(num_classes, components)?
                }
            },
            _ => self.fit_and_store(num_classes, components)?,
        };
        let approx = Arc::new(approx);
        self.memo.lock().expect("cache lock").insert(key, Arc::clone(&approx));
        Ok(approx)
    }

    fn fit_and_store(&self, num_classes: usize, components: usize) -> Result<GmLikApprox> {
        let grid = FitGrid::new(num_classes)?;
        let approx = fit_softmax_gm_approx(num_classes, components, &grid)?;
        if let Some(dir) = &self.dir {
            if let Err(e) = write_record(dir, &approx, &grid) {
                log::warn!("could not write fit cache in {}: {e}", dir.display());
            }
        }
        Ok(approx)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

fn write_record(dir: &Path, a: &GmLikApprox, grid: &FitGrid) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = GmLikCache::path_for(dir, a.num_classes, a.components());
    let tmp = dir.join(format!(".{}.{}.tmp", path.file_name().unwrap().to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        writeln!(f, "classes {}", a.num_classes)?;
        writeln!(f, "components {}", a.components())?;
        writeln!(f, "weights {}", join(&a.weights))?;
        writeln!(f, "means {}", join(&a.means))?;
        writeln!(f, "scales {}", join(&a.scales))?;
        writeln!(f, "fit_error {:e}", a.fit_error)?;
        writeln!(f, "grid {}", grid.describe())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(())
}

fn read_record(path: &Path) -> Result<GmLikApprox> {
    let text = fs::read_to_string(path)?;
    let mut fields: HashMap<&str, (usize, &str)> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if let Some((k, v)) = line.split_once(' ') {
            fields.insert(k, (i + 1, v));
        }
    }
    let get = |k: &str| fields.get(k).copied().ok_or(Error::Parse { line: 0, msg: format!("missing {k}") });
    let nums = |k: &str| -> Result<Vec<f64>> {
        let (line, v) = get(k)?;
        v.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("{k}: {e}") }))
            .collect()
    };
    let int = |k: &str| -> Result<usize> {
        let (line, v) = get(k)?;
        v.trim().parse().map_err(|e| Error::Parse { line, msg: format!("{k}: {e}") })
    };
    let a = GmLikApprox {
        num_classes: int("classes")?,
        weights: nums("weights")?,
        means: nums("means")?,
        scales: nums("scales")?,
        fit_error: nums("fit_error")?.first().copied().unwrap_or(f64::NAN),
    };
    let l = int("components")?;
    if a.weights.len() != l || a.means.len() != l || a.scales.len() != l || a.scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Parse { line: 0, msg: "inconsistent mixture record".into() });
    }
    Ok(a)
}

/// Conditional moments of `γ ~ N(c − p̂, q)` under the weight `Φ((γ − μ)/σ)`:
/// returns `(ln T0, T1/T0, T2/T0)`.
pub(crate) fn partial_moments_normalized(c: f64, p_hat: f64, q: f64, mu: f64, sigma: f64) -> (f64, f64, f64) {
    let s2 = sigma * sigma + q;
    let s = s2.sqrt();
    let x = (c - p_hat - mu) / s;
    let ratio = normal::mills_ratio(x);
    let m1 = (c - p_hat) + q * ratio / s;
    let m2 = m1 * m1 + q - q * q * ratio * (x + ratio) / s2;
    (normal::ln_cdf(x), m1, m2)
}

/// `(T0, T1, T2)`: zeroth to second moments of `γ ~ N(c − p̂, q)` weighted by
/// `Φ((γ − μ)/σ)`.
pub fn gaussian_cdf_partial_moments(c: f64, p_hat: f64, q: f64, mu: f64, sigma: f64) -> (f64, f64, f64) {
    let (ln_t0, m1, m2) = partial_moments_normalized(c, p_hat, q, mu, sigma);
    let t0 = ln_t0.exp();
    (t0, t0 * m1, t0 * m2)
}

/// Posterior score moments under the mixture approximation.
///
/// Outer integral over `z_y` on `points` equispaced nodes spanning
/// `p̂_y ± 4 sd`; the inner integrals over `γ_k = z_y − z_k` factorize.
pub fn spa_moments_gm(
    y: usize,
    p_hat: &[f64],
    q_p: &[f64],
    approx: &GmLikApprox,
    points: usize,
) -> Result<MomentResult> {
    check_message(y, p_hat, q_p)?;
    let d = p_hat.len();
    if approx.num_classes != d {
        return Err(Error::DimensionMismatch(format!(
            "mixture fitted for {} classes, message has {d}",
            approx.num_classes
        )));
    }
    if points < 2 {
        return Err(Error::InvalidInput("outer integral needs at least 2 points".into()));
    }
    let sd = q_p[y].sqrt();
    let nodes: Vec<f64> = (0..points).map(|j| p_hat[y] + sd * (-4.0 + 8.0 * j as f64 / (points - 1) as f64)).collect();
    let ln_w: Vec<f64> = {
        let raw: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let trap: f64 = if j == 0 || j == points - 1 { 0.5 } else { 1.0 };
                trap.ln() + normal::ln_gauss(c, p_hat[y], q_p[y])
            })
            .collect();
        let norm = raw.iter().copied().fold(f64::NEG_INFINITY, normal::ln_add_exp);
        raw.iter().map(|v| v - norm).collect()
    };

    let ncomp = approx.components();
    // (ln weight, c, per-coordinate conditional moments)
    let mut terms: Vec<(f64, f64, Vec<(f64, f64)>)> = Vec::with_capacity(points * ncomp);
    for (j, &c) in nodes.iter().enumerate() {
        for l in 0..ncomp {
            let mut ln_term = ln_w[j] + approx.weights[l].ln();
            let mut moments = vec![(0.0, 0.0); d];
            for k in (0..d).filter(|&k| k != y) {
                let (ln_t0, m1, m2) = partial_moments_normalized(c, p_hat[k], q_p[k], approx.means[l], approx.scales[l]);
                ln_term += ln_t0;
                moments[k] = (m1, m2);
            }
            terms.push((ln_term, c, moments));
        }
    }
    let max = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    for (ln_term, c, moments) in &terms {
        let w = (ln_term - max).exp();
        s0 += w;
        for k in 0..d {
            if k == y {
                s1[k] += w * c;
                s2[k] += w * c * c;
            } else {
                let (m1, m2) = moments[k];
                s1[k] += w * (c - m1);
                s2[k] += w * (c * c - 2.0 * c * m1 + m2);
            }
        }
    }
    let norm = max.exp() * s0;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateLikelihood(norm));
    }
    let z_hat: Vec<f64> = s1.iter().map(|v| v / s0).collect();
    let q_z = s2.iter().zip(&z_hat).map(|(v, z)| (v / s0 - z * z).max(0.0)).collect();
    Ok(MomentResult { z_hat, q_z, c: norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::moments_bruteforce;

    fn quad(c: f64, p: f64, q: f64, mu: f64, sigma: f64) -> (f64, f64, f64) {
        let n = 40001;
        let sd = q.sqrt();
        let mean = c - p;
        let h = 20.0 * sd / (n - 1) as f64;
        let mut t = (0.0, 0.0, 0.0);
        for i in 0..n {
            let g = mean - 10.0 * sd + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * h;
            let f = normal::gauss(g, mean, q) * normal::cdf((g - mu) / sigma) * w;
            t.0 += f;
            t.1 += f * g;
            t.2 += f * g * g;
        }
        t
    }

    #[test]
    fn partial_moments_limits() {
        let (t0, t1, t2) = gaussian_cdf_partial_moments(1.5, 0.5, 0.7, -60.0, 1.0);
        assert!((t0 - 1.0).abs() < 1e-12);
        assert!((t1 - 1.0).abs() < 1e-9);
        assert!((t2 - 1.7).abs() < 1e-9);
        let (t0, _, _) = gaussian_cdf_partial_moments(2.0, 1.0, 0.3, 1.0, 0.8);
        assert!((t0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn partial_moments_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = rng.random_range(-3.0..3.0);
            let p = rng.random_range(-3.0..3.0);
            let q = rng.random_range(0.05..4.0);
            let mu = rng.random_range(-3.0..3.0);
            let sigma = rng.random_range(0.3..3.0);
            let exact = gaussian_cdf_partial_moments(c, p, q, mu, sigma);
            let oracle = quad(c, p, q, mu, sigma);
            for (a, b) in [(exact.0, oracle.0), (exact.1, oracle.1), (exact.2, oracle.2)] {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn partial_moments_deep_tail_stay_finite() {
        let (ln_t0, m1, m2) = partial_moments_normalized(0.0, 30.0, 1.0, 0.0, 1.0);
        assert!(ln_t0 < -200.0 && ln_t0.is_finite());
        assert!(m1.is_finite() && m2 >= m1 * m1);
    }

    #[test]
    fn logistic_fit_is_tight() {
        let grid = FitGrid::new(2).unwrap();
        let a = fit_softmax_gm_approx(2, 2, &grid).unwrap();
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        // dense independent check
        let sup = (0..=16000)
            .map(|i| {
                let g = -8.0 + i as f64 * 1e-3;
                (a.eval(&[g]) - 1.0 / (1.0 + (-g).exp())).abs()
            })
            .fold(0.0, f64::max);
        assert!(sup <= 0.01, "sup error {sup}");
    }

    #[test]
    fn more_components_never_hurt() {
        let grid = FitGrid::new(4).unwrap();
        let one = fit_softmax_gm_approx(4, 1, &grid).unwrap();
        let two = fit_softmax_gm_approx(4, 2, &grid).unwrap();
        assert!(two.fit_error <= one.fit_error + 1e-12, "{} > {}", two.fit_error, one.fit_error);
        assert!((two.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cache_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GmLikCache::with_dir(dir.path());
        let a = cache.get(3, 1).unwrap();
        assert!(GmLikCache::path_for(dir.path(), 3, 1).exists());
        let reread = GmLikCache::with_dir(dir.path()).get(3, 1).unwrap();
        for (x, y) in a.means.iter().zip(&reread.means) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
        }
    }

    fn approx4() -> Arc<GmLikApprox> {
        GmLikCache::global().get(4, 2).unwrap()
    }

    #[test]
    fn vanishing_variance_returns_message_mean() {
        let p = [0.3, -0.2, 1.0, 0.1];
        let r = spa_moments_gm(1, &p, &[1e-8; 4], &approx4(), 7).unwrap();
        for d in 0..4 {
            assert!((r.z_hat[d] - p[d]).abs() < 1e-3);
            assert!(r.q_z[d] < 1e-6);
        }
    }

    #[test]
    fn symmetric_instance() {
        let r = spa_moments_gm(0, &[0.0; 4], &[1.0; 4], &approx4(), 7).unwrap();
        assert!(r.z_hat[0] > 0.0);
        for d in 2..4 {
            assert!((r.z_hat[d] - r.z_hat[1]).abs() < 1e-6);
        }
        assert!(r.z_hat[1] < 0.0);
    }

    fn max_relative_gap(r: &MomentResult, o: &MomentResult) -> f64 {
        (0..r.z_hat.len())
            .map(|d| {
                let z = (r.z_hat[d] - o.z_hat[d]).abs() / o.z_hat[d].abs();
                let q = (r.q_z[d] - o.q_z[d]).abs() / o.q_z[d];
                z.max(q)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn close_to_bruteforce() {
        let p = [1.0, 0.0, 0.0, 0.0];
        let q = [1.0; 4];
        let o = moments_bruteforce(1, &p, &q, 41, 6.0).unwrap();
        // two shared components leave about 4% sup error in the likelihood at
        // D = 4, which shows up as 10-15% in individual moments
        let two = spa_moments_gm(1, &p, &q, &approx4(), 7).unwrap();
        assert!(max_relative_gap(&two, &o) < 0.15, "{two:?} vs {o:?}");
        let three = spa_moments_gm(1, &p, &q, &GmLikCache::global().get(4, 3).unwrap(), 7).unwrap();
        assert!(max_relative_gap(&three, &o) < 0.05, "{three:?} vs {o:?}");
    }
}
