use crate::error::{Error, Result};
use crate::normal;

const MAX_ITERS: usize = 100;
const LL_TOL: f64 = 1e-8;
const TAIL_FRACTION: f64 = 0.02;

/// One-dimensional Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gm1d {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl Gm1d {
    pub fn pdf(&self, x: f64) -> f64 {
        self.components().map(|(w, m, v)| w * normal::gauss(x, m, v)).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components().map(|(w, m, v)| w * normal::cdf((x - m) / v.sqrt())).sum()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.components()
            .map(|(w, m, v)| w.ln() + normal::ln_gauss(x, m, v))
            .fold(f64::NEG_INFINITY, normal::ln_add_exp)
    }

    /// Mean log-likelihood per sample.
    pub fn mean_log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum::<f64>() / samples.len() as f64
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.vars)
            .map(|((&w, &m), &v)| (w, m, v))
    }
}

/// EM fit of an `l`-component mixture with every variance floored at `var_floor`.
/// Initial components are the means and variances of `l` equal chunks of the
/// sorted samples. For `l ≥ 3` a second start puts the outer 2% on each side in
/// its own chunk, and the start with the higher final log-likelihood is kept.
pub fn fit_gm_1d(samples: &[f64], l: usize, var_floor: f64) -> Result<Gm1d> {
    if l == 0 || samples.len() < l {
        return Err(Error::InvalidInput(format!(
            "need at least {l} samples to fit {l} mixture components, got {}",
            samples.len()
        )));
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let equal: Vec<usize> = (0..=l).map(|c| c * n / l).collect();
    let (mut best, best_ll) = em_from(samples, &sorted, &equal, var_floor);
    let tail = (n as f64 * TAIL_FRACTION).floor() as usize;
    if l >= 3 && tail >= 1 && n - 2 * tail >= l - 2 {
        let inner = n - 2 * tail;
        let mut cuts = vec![0];
        cuts.extend((0..l - 1).map(|c| tail + c * inner / (l - 2)));
        cuts.push(n);
        let (gm, ll) = em_from(samples, &sorted, &cuts, var_floor);
        if ll > best_ll {
            best = gm;
        }
    }
    Ok(best)
}

/// EM from the chunks `sorted[cuts[c]..cuts[c + 1]]`. Returns the fit and its
/// final mean log-likelihood.
fn em_from(samples: &[f64], sorted: &[f64], cuts: &[usize], var_floor: f64) -> (Gm1d, f64) {
    let n = samples.len();
    let l = cuts.len() - 1;
    let mut gm = Gm1d { weights: Vec::with_capacity(l), means: Vec::with_capacity(l), vars: Vec::with_capacity(l) };
    for c in 0..l {
        let chunk = &sorted[cuts[c]..cuts[c + 1]];
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        let var = chunk.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / chunk.len() as f64;
        gm.weights.push(chunk.len() as f64 / n as f64);
        gm.means.push(mean);
        gm.vars.push(var.max(var_floor));
    }

    let mut resp = vec![0.0; n * l];
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..MAX_ITERS {
        // E-step in the log domain
        let mut ll = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let row = &mut resp[i * l..(i + 1) * l];
            let mut max = f64::NEG_INFINITY;
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = gm.weights[c].ln() + normal::ln_gauss(x, gm.means[c], gm.vars[c]);
                max = max.max(*slot);
            }
            let mut total = 0.0;
            for slot in row.iter_mut() {
                *slot = (*slot - max).exp();
                total += *slot;
            }
            for slot in row.iter_mut() {
                *slot /= total;
            }
            ll += max + total.ln();
        }
        ll /= n as f64;

        for c in 0..l {
            let mass: f64 = (0..n).map(|i| resp[i * l + c]).sum();
            if mass <= 1e-300 {
                gm.weights[c] = 0.0;
                continue;
            }
            let mean = (0..n).map(|i| resp[i * l + c] * samples[i]).sum::<f64>() / mass;
            let var = (0..n)
                .map(|i| resp[i * l + c] * (samples[i] - mean) * (samples[i] - mean))
                .sum::<f64>()
                / mass;
            gm.weights[c] = mass / n as f64;
            gm.means[c] = mean;
            gm.vars[c] = var.max(var_floor);
        }
        let total: f64 = gm.weights.iter().sum();
        gm.weights.iter_mut().for_each(|w| *w /= total);

        if (ll - prev_ll).abs() < LL_TOL {
            break;
        }
        prev_ll = ll;
    }
    let ll = gm.mean_log_likelihood(samples);
    (gm, ll)
}
