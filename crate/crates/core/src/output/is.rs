//! Importance sampling from the Gaussian message.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_message, ln_softmax_at, MomentResult};
use crate::error::{Error, Result};

/// Self-normalized importance-sampling moments with `samples` draws.
pub fn spa_moments_is(y: usize, p_hat: &[f64], q_p: &[f64], samples: usize, seed: u64) -> Result<MomentResult> {
    check_message(y, p_hat, q_p)?;
    if samples == 0 {
        return Err(Error::InvalidInput("importance sampling needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..samples * p_hat.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    spa_moments_is_with_noise(y, p_hat, q_p, &noise)
}

/// Same estimator with caller-supplied standard normal draws, row-major
/// `samples × D`.
pub fn spa_moments_is_with_noise(y: usize, p_hat: &[f64], q_p: &[f64], noise: &[f64]) -> Result<MomentResult> {
    check_message(y, p_hat, q_p)?;
    let d = p_hat.len();
    if noise.is_empty() || noise.len() % d != 0 {
        return Err(Error::DimensionMismatch(format!("noise length {} is not a multiple of {d}", noise.len())));
    }
    let sd: Vec<f64> = q_p.iter().map(|q| q.sqrt()).collect();
    let draws: Vec<Vec<f64>> = noise
        .chunks_exact(d)
        .map(|e| (0..d).map(|k| p_hat[k] + sd[k] * e[k]).collect())
        .collect();
    let ln_w: Vec<f64> = draws.iter().map(|z| ln_softmax_at(z, y)).collect();
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateLikelihood(0.0));
    }
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    for (z, lw) in draws.iter().zip(&ln_w) {
        let w = (lw - max).exp();
        s0 += w;
        for k in 0..d {
            s1[k] += w * z[k];
            s2[k] += w * z[k] * z[k];
        }
    }
    let c = max.exp() * s0 / draws.len() as f64;
    if !(c > 0.0) {
        return Err(Error::DegenerateLikelihood(c));
    }
    let z_hat: Vec<f64> = s1.iter().map(|v| v / s0).collect();
    let q_z = s2.iter().zip(&z_hat).map(|(v, m)| (v / s0 - m * m).max(0.0)).collect();
    Ok(MomentResult { z_hat, q_z, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::moments_bruteforce;

    #[test]
    fn deterministic_per_seed() {
        let a = spa_moments_is(0, &[0.1, 0.2, 0.3], &[1.0; 3], 1500, 9).unwrap();
        let b = spa_moments_is(0, &[0.1, 0.2, 0.3], &[1.0; 3], 1500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vanishing_variance() {
        let p = [0.5, -0.5, 0.0, 1.0];
        let r = spa_moments_is(3, &p, &[1e-10; 4], 1500, 1).unwrap();
        for k in 0..4 {
            assert!((r.z_hat[k] - p[k]).abs() < 1e-3);
        }
    }

    #[test]
    fn seed_average_matches_bruteforce() {
        let p = [1.0, 0.0, 0.0, 0.0];
        let q = [1.0; 4];
        let oracle = moments_bruteforce(0, &p, &q, 41, 6.0).unwrap();
        let runs: Vec<MomentResult> = (0..200).map(|s| spa_moments_is(0, &p, &q, 1500, s).unwrap()).collect();
        for k in 0..4 {
            let vals: Vec<f64> = runs.iter().map(|r| r.z_hat[k]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
            assert!((mean - oracle.z_hat[k]).abs() <= 0.02 * oracle.z_hat[k].abs().max(0.1), "{mean} vs {}", oracle.z_hat[k]);
            // spread of one run is roughly the posterior sd over sqrt(effective samples)
            let nominal = (oracle.q_z[k] / 1500.0).sqrt();
            assert!(sd > 0.5 * nominal && sd < 3.0 * nominal, "sd {sd} nominal {nominal}");
            let qmean = runs.iter().map(|r| r.q_z[k]).sum::<f64>() / runs.len() as f64;
            assert!((qmean - oracle.q_z[k]).abs() <= 0.02 * oracle.q_z[k]);
        }
    }
}
