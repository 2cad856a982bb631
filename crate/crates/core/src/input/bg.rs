use ndarray::Array2;

use super::{Hyperparameters, InputDenoiser, InputEstimate};
use crate::error::{Error, Result};
use crate::gamp::Mode;
use crate::normal;

/// Per-class Bernoulli-Gaussian (spike-and-slab) prior on weight entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BgPrior {
    beta: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl BgPrior {
    pub fn new(beta: Vec<f64>, mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if beta.len() != mean.len() || beta.len() != var.len() {
            return Err(Error::DimensionMismatch("prior parameter lengths differ".into()));
        }
        if beta.iter().any(|&b| !(b > 0.0 && b <= 1.0)) {
            return Err(Error::InvalidInput("activity probabilities must lie in (0, 1]".into()));
        }
        if var.iter().any(|&v| !(v > 0.0 && v.is_finite())) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("slab variances must be positive and means finite".into()));
        }
        Ok(Self { beta, mean, var })
    }

    /// Scale-matched starting point: `β = min(1/2, M/(2N))`, zero mean, and a slab
    /// variance giving prior score energy `D - 1` per sample.
    pub fn initial(num_classes: usize, num_samples: usize, num_features: usize, frobenius_sq: f64) -> Self {
        let beta = (num_samples as f64 / (2.0 * num_features as f64)).min(0.5);
        let row_energy = frobenius_sq / num_samples as f64;
        let var = if row_energy > 0.0 { (num_classes as f64 - 1.0) / (beta * row_energy) } else { 1.0 };
        Self {
            beta: vec![beta; num_classes],
            mean: vec![0.0; num_classes],
            var: vec![var; num_classes],
        }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn num_classes(&self) -> usize {
        self.beta.len()
    }
}

/// Entrywise spike-and-slab posterior.
#[derive(Debug, Clone)]
pub struct BgPosterior {
    pub x_hat: Array2<f64>,
    pub q_x: Array2<f64>,
    /// Posterior probability that the entry is drawn from the slab.
    pub support_prob: Array2<f64>,
    /// Slab-conditional posterior mean.
    pub slab_mean: Array2<f64>,
    /// Slab-conditional posterior variance, one per class.
    pub slab_var: Vec<f64>,
}

fn sigmoid_neg(l: f64) -> f64 {
    // 1 / (1 + e^l)
    if l > 0.0 {
        let e = (-l).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + l.exp())
    }
}

pub fn bg_denoise(r_hat: &Array2<f64>, q_r: f64, prior: &BgPrior) -> Result<BgPosterior> {
    if !(q_r > 0.0) {
        return Err(Error::InvalidInput(format!("q_r must be positive, got {q_r}")));
    }
    let (n, d) = r_hat.dim();
    if d != prior.num_classes() {
        return Err(Error::DimensionMismatch(format!("{d} columns for a {}-class prior", prior.num_classes())));
    }
    let slab_var: Vec<f64> = prior.var.iter().map(|&v| 1.0 / (1.0 / q_r + 1.0 / v)).collect();
    let log_odds: Vec<f64> = prior.beta.iter().map(|&b| ((1.0 - b) / b).ln()).collect();

    let mut post = BgPosterior {
        x_hat: Array2::zeros((n, d)),
        q_x: Array2::zeros((n, d)),
        support_prob: Array2::zeros((n, d)),
        slab_mean: Array2::zeros((n, d)),
        slab_var: slab_var.clone(),
    };
    for ((i, k), &r) in r_hat.indexed_iter() {
        let (m, v) = (prior.mean[k], prior.var[k]);
        let l = log_odds[k] + normal::ln_gauss(r, 0.0, q_r) - normal::ln_gauss(r, m, v + q_r);
        let pi = sigmoid_neg(l);
        let gamma = slab_var[k] * (r / q_r + m / v);
        let x = pi * gamma;
        post.support_prob[[i, k]] = pi;
        post.slab_mean[[i, k]] = gamma;
        post.x_hat[[i, k]] = x;
        post.q_x[[i, k]] = pi * slab_var[k] + pi * (1.0 - pi) * gamma * gamma;
    }
    Ok(post)
}

/// One EM step for the per-class prior from a posterior computed under `prior`.
pub fn em_update_bg(r_hat: &Array2<f64>, _q_r: f64, prior: &BgPrior, posterior: &BgPosterior) -> BgPrior {
    let (n, d) = r_hat.dim();
    let nf = n as f64;
    let mut next = prior.clone();
    for k in 0..d {
        let pi = posterior.support_prob.column(k);
        let gamma = posterior.slab_mean.column(k);
        let mass: f64 = pi.sum();
        let lo = 1.0 / nf;
        let hi = 1.0 - 1.0 / nf;
        next.beta[k] = if hi > lo { (mass / nf).clamp(lo, hi) } else { 0.5 };
        if mass > 1e-300 {
            let m = pi.iter().zip(gamma.iter()).map(|(p, g)| p * g).sum::<f64>() / mass;
            let nu = posterior.slab_var[k];
            let v = pi
                .iter()
                .zip(gamma.iter())
                .map(|(p, g)| p * (nu + (g - m) * (g - m)))
                .sum::<f64>()
                / mass;
            next.mean[k] = m;
            next.var[k] = v.max(1e-8);
        }
    }
    next
}

/// Per-class marginal log-likelihood of `r̂` under `x ~ prior`, `r = x + N(0, q_r)`.
pub fn bg_log_likelihood(r_hat: &Array2<f64>, q_r: f64, prior: &BgPrior) -> Vec<f64> {
    let d = r_hat.ncols();
    (0..d)
        .map(|k| {
            let (b, m, v) = (prior.beta[k], prior.mean[k], prior.var[k]);
            r_hat
                .column(k)
                .iter()
                .map(|&r| {
                    normal::ln_add_exp(
                        (1.0 - b).ln() + normal::ln_gauss(r, 0.0, q_r),
                        b.ln() + normal::ln_gauss(r, m, v + q_r),
                    )
                })
                .sum()
        })
        .collect()
}

/// Sum-product input denoiser with optional EM tuning of the prior.
#[derive(Debug, Clone)]
pub struct BernoulliGaussian {
    prior: BgPrior,
    em: bool,
    last: Option<BgPosterior>,
}

impl BernoulliGaussian {
    pub fn new(prior: BgPrior, em: bool) -> Self {
        Self { prior, em, last: None }
    }

    pub fn prior(&self) -> &BgPrior {
        &self.prior
    }
}

impl InputDenoiser for BernoulliGaussian {
    fn mode(&self) -> Mode {
        Mode::SumProduct
    }

    fn initial_estimate(&self, num_features: usize, num_classes: usize) -> (Array2<f64>, f64) {
        let p = &self.prior;
        let x0 = Array2::from_shape_fn((num_features, num_classes), |(_, k)| p.beta[k] * p.mean[k]);
        let q0 = (0..num_classes)
            .map(|k| p.beta[k] * p.var[k] + p.beta[k] * (1.0 - p.beta[k]) * p.mean[k] * p.mean[k])
            .sum::<f64>()
            / num_classes as f64;
        (x0, q0)
    }

    fn denoise(&mut self, r_hat: &Array2<f64>, q_r: f64) -> Result<InputEstimate> {
        let post = bg_denoise(r_hat, q_r, &self.prior)?;
        let est = InputEstimate { x_hat: post.x_hat.clone(), q_x_entries: post.q_x.clone() };
        self.last = Some(post);
        Ok(est)
    }

    fn tune_after(&mut self, r_hat: &Array2<f64>, q_r: f64) -> Result<()> {
        if self.em {
            if let Some(post) = &self.last {
                self.prior = em_update_bg(r_hat, q_r, &self.prior, post);
            }
        }
        Ok(())
    }

    fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters::BernoulliGaussian {
            beta: self.prior.beta.clone(),
            mean: self.prior.mean.clone(),
            var: self.prior.var.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    /// Trapezoid quadrature of the spike-and-slab posterior over `[-10, 10]`.
    fn quadrature(r: f64, q_r: f64, beta: f64, m: f64, v: f64) -> (f64, f64) {
        let n = 20001;
        let (lo, hi) = (-10.0, 10.0);
        let h = (hi - lo) / (n - 1) as f64;
        let spike = (1.0 - beta) * normal::gauss(0.0, r, q_r);
        let (mut z, mut s1, mut s2) = (spike, 0.0, 0.0);
        for i in 0..n {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            let f = w * beta * normal::gauss(x, m, v) * normal::gauss(x, r, q_r);
            z += f;
            s1 += f * x;
            s2 += f * x * x;
        }
        let mean = s1 / z;
        (mean, s2 / z - mean * mean)
    }

    fn prior1(beta: f64, m: f64, v: f64) -> BgPrior {
        BgPrior::new(vec![beta], vec![m], vec![v]).unwrap()
    }

    #[test]
    fn full_slab_is_wiener_shrinkage() {
        let r = array![[1.5], [-0.3], [4.0]];
        let post = bg_denoise(&r, 0.5, &prior1(1.0, 0.0, 2.0)).unwrap();
        for (x, r) in post.x_hat.iter().zip(r.iter()) {
            assert!((x - r * 2.0 / 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn vanishing_activity_collapses_to_zero() {
        let r = array![[1.0], [3.0]];
        let post = bg_denoise(&r, 0.5, &prior1(1e-300, 0.0, 2.0)).unwrap();
        assert!(post.x_hat.iter().all(|x| x.abs() < 1e-250));
        assert!(post.q_x.iter().all(|q| q.abs() < 1e-250));
    }

    #[test]
    fn matches_quadrature_at_reference_point() {
        let post = bg_denoise(&array![[1.0]], 0.5, &prior1(0.3, 0.0, 2.0)).unwrap();
        let (mean, var) = quadrature(1.0, 0.5, 0.3, 0.0, 2.0);
        assert!((post.x_hat[[0, 0]] - mean).abs() < 1e-6);
        assert!((post.q_x[[0, 0]] - var).abs() < 1e-6);
    }

    #[test]
    fn matches_quadrature_on_random_sweep() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let beta = rng.random_range(0.01..1.0);
            let m = rng.random_range(-1.0..1.0);
            let v = rng.random_range(0.1..2.0);
            let q = rng.random_range(0.05..1.0);
            let r = rng.random_range(-3.0..3.0);
            let post = bg_denoise(&array![[r]], q, &prior1(beta, m, v)).unwrap();
            let (mean, var) = quadrature(r, q, beta, m, v);
            assert!((post.x_hat[[0, 0]] - mean).abs() < 1e-6, "{beta} {m} {v} {q} {r}");
            assert!((post.q_x[[0, 0]] - var).abs() < 1e-6);
            assert!(post.q_x[[0, 0]] >= 0.0);
        }
    }

    #[test]
    fn huge_observations_stay_finite() {
        let post = bg_denoise(&array![[1e6], [-1e6]], 1e-3, &prior1(0.01, 0.0, 1.0)).unwrap();
        assert!(post.x_hat.iter().all(|x| x.is_finite()));
        assert!((post.support_prob[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_noise() {
        assert!(bg_denoise(&array![[1.0]], 0.0, &prior1(0.5, 0.0, 1.0)).is_err());
    }

    #[test]
    fn em_keeps_zero_mean_under_symmetric_zero_input() {
        let r = Array2::zeros((10, 2));
        let prior = BgPrior::new(vec![0.2, 0.4], vec![0.0; 2], vec![1.0, 2.0]).unwrap();
        let post = bg_denoise(&r, 0.3, &prior).unwrap();
        let next = em_update_bg(&r, 0.3, &prior, &post);
        assert_eq!(next.mean(), &[0.0, 0.0]);
    }

    #[test]
    fn em_clamps_full_support() {
        let r = Array2::from_elem((8, 1), 50.0);
        let prior = prior1(1.0, 0.0, 10.0);
        let post = bg_denoise(&r, 0.1, &prior).unwrap();
        let next = em_update_bg(&r, 0.1, &prior, &post);
        assert!((next.beta()[0] - (1.0 - 1.0 / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn em_recovers_activity_rate() {
        let (n, d, rate, q_r) = (5000, 4, 0.02, 0.01_f64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = Array2::from_shape_fn((n, d), |_| {
            let x: f64 = if rng.random::<f64>() < rate { rng.sample(StandardNormal) } else { 0.0 };
            x + q_r.sqrt() * rng.sample::<f64, _>(StandardNormal)
        });
        let mut den = BernoulliGaussian::new(BgPrior::initial(d, 300, n, 300.0 * 40.0), true);
        for _ in 0..20 {
            den.denoise(&r, q_r).unwrap();
            den.tune_after(&r, q_r).unwrap();
        }
        for &b in den.prior().beta() {
            assert!(b > rate / 2.0 && b < rate * 2.0, "beta {b}");
        }
    }

    #[test]
    fn em_never_decreases_marginal_likelihood() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let q_r: f64 = rng.random_range(0.05..0.5);
            let r = Array2::from_shape_fn((400, 3), |_| {
                let x: f64 = if rng.random::<f64>() < 0.2 { 2.0 * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                x + q_r.sqrt() * rng.sample::<f64, _>(StandardNormal)
            });
            let mut prior = BgPrior::new(
                (0..3).map(|_| rng.random_range(0.05..0.9)).collect(),
                (0..3).map(|_| rng.random_range(-0.5..0.5)).collect(),
                (0..3).map(|_| rng.random_range(0.2..5.0)).collect(),
            )
            .unwrap();
            for _ in 0..5 {
                let before = bg_log_likelihood(&r, q_r, &prior);
                let post = bg_denoise(&r, q_r, &prior).unwrap();
                prior = em_update_bg(&r, q_r, &prior, &post);
                let after = bg_log_likelihood(&r, q_r, &prior);
                for (b, a) in before.iter().zip(&after) {
                    assert!(a >= &(b - 1e-8 * b.abs()), "trial {trial}: {b} -> {a}");
                }
            }
        }
    }

    #[test]
    fn estimate_magnitude_bounded_by_slab_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let r = Array2::from_shape_fn((200, 2), |_| rng.random_range(-4.0..4.0));
        let prior = BgPrior::new(vec![0.1, 0.7], vec![0.3, -0.2], vec![1.0, 0.5]).unwrap();
        let post = bg_denoise(&r, 0.2, &prior).unwrap();
        for ((x, g), q) in post.x_hat.iter().zip(post.slab_mean.iter()).zip(post.q_x.iter()) {
            assert!(x.abs() <= g.abs() + 1e-15);
            assert!(*q >= 0.0);
        }
    }
}
