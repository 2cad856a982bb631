//! Likelihood-side (output) computations for the soft-max model: posterior
//! moments of the scores under a diagonal Gaussian message, and the min-sum
//! score update.

mod gm;
mod grid;
mod is;
mod newton;
mod taylor;

pub use gm::{
    fit_softmax_gm_approx, gaussian_cdf_partial_moments, spa_moments_gm, FitGrid, GmLikApprox,
    GmLikCache,
};
pub use grid::{moments_bruteforce, spa_moments_ni};
pub use is::{spa_moments_is, spa_moments_is_with_noise};
pub use newton::{gradient_and_curvature, msa_objective, msa_z_newton, NewtonResult};
pub use taylor::spa_moments_ts;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamp::Mode;

/// Soft-max probabilities with max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// `ln p(y | z)` under the soft-max model.
pub fn ln_softmax_at(z: &[f64], y: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = z.iter().map(|&v| (v - max).exp()).sum();
    z[y] - max - total.ln()
}

/// Posterior score moments for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentResult {
    pub z_hat: Vec<f64>,
    pub q_z: Vec<f64>,
    /// Normalizing constant `∫ p(y|z) N(z; p̂, Q) dz` (or its approximation).
    pub c: f64,
}

pub(crate) fn check_message(y: usize, p_hat: &[f64], q_p: &[f64]) -> Result<()> {
    if p_hat.len() != q_p.len() {
        return Err(Error::DimensionMismatch(format!("{} means, {} variances", p_hat.len(), q_p.len())));
    }
    if y >= p_hat.len() {
        return Err(Error::InvalidInput(format!("label {y} outside 0..{}", p_hat.len())));
    }
    if q_p.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::InvalidInput("score variances must be positive".into()));
    }
    Ok(())
}

/// Sum-product moment approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethod {
    /// Gaussian-cdf mixture approximation of the likelihood.
    Gm,
    /// Importance sampling from the Gaussian message.
    Is,
    /// Hyper-rectangular grid integration.
    Ni,
    /// Second-order Taylor expansion of the likelihood.
    Ts,
}

impl std::str::FromStr for MomentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gm" => Ok(Self::Gm),
            "is" => Ok(Self::Is),
            "ni" => Ok(Self::Ni),
            "ts" => Ok(Self::Ts),
            other => Err(Error::InvalidInput(format!("unknown moment method {other:?}"))),
        }
    }
}

impl std::fmt::Display for MomentMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Gm => "gm",
            Self::Is => "is",
            Self::Ni => "ni",
            Self::Ts => "ts",
        };
        f.write_str(s)
    }
}

/// Where in the run an output estimate is requested; seeds stochastic methods.
#[derive(Debug, Clone, Copy)]
pub struct SampleContext {
    pub iteration: usize,
    pub sample: usize,
    pub seed: u64,
}

impl SampleContext {
    /// Deterministic per-(iteration, sample) seed.
    pub fn stream_seed(&self) -> u64 {
        splitmix(splitmix(self.seed ^ (self.iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ self.sample as u64)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Default)]
pub struct OutputEstimate {
    pub z_hat: Vec<f64>,
    pub q_z: Vec<f64>,
    /// A Taylor-series breakdown was replaced by the mixture method.
    pub fell_back: bool,
    /// The Newton solve hit its iteration cap.
    pub not_converged: bool,
}

/// Per-sample output denoiser used by the engine. Implementations must be
/// re-entrant: the engine may call `estimate` for different samples concurrently.
pub trait OutputDenoiser: Sync {
    fn mode(&self) -> Mode;

    fn estimate(&self, label: usize, p_hat: &[f64], q_p: &[f64], ctx: SampleContext) -> Result<OutputEstimate>;
}

/// Sum-product output denoiser: posterior mean and variance of the scores.
#[derive(Debug, Clone)]
pub struct SumProduct {
    pub method: MomentMethod,
    /// Needed by the mixture method and as the Taylor fallback.
    pub approx: Option<Arc<GmLikApprox>>,
    pub gm_points: usize,
    pub is_samples: usize,
    pub ni_points: usize,
    pub ni_radius: f64,
}

impl SumProduct {
    pub fn new(method: MomentMethod, approx: Option<Arc<GmLikApprox>>) -> Self {
        Self { method, approx, gm_points: 7, is_samples: 1500, ni_points: 7, ni_radius: 4.0 }
    }
}

impl OutputDenoiser for SumProduct {
    fn mode(&self) -> Mode {
        Mode::SumProduct
    }

    fn estimate(&self, label: usize, p_hat: &[f64], q_p: &[f64], ctx: SampleContext) -> Result<OutputEstimate> {
        let gm = || match &self.approx {
            Some(a) => spa_moments_gm(label, p_hat, q_p, a, self.gm_points),
            None => Err(Error::InvalidInput("mixture moments need a fitted likelihood approximation".into())),
        };
        let (res, fell_back) = match self.method {
            MomentMethod::Gm => (gm()?, false),
            MomentMethod::Is => (spa_moments_is(label, p_hat, q_p, self.is_samples, ctx.stream_seed())?, false),
            MomentMethod::Ni => (spa_moments_ni(label, p_hat, q_p, self.ni_points, self.ni_radius)?, false),
            MomentMethod::Ts => match spa_moments_ts(label, p_hat, q_p) {
                Ok(r) => (r, false),
                Err(Error::MethodBreakdown(_)) => (gm()?, true),
                Err(e) => return Err(e),
            },
        };
        Ok(OutputEstimate { z_hat: res.z_hat, q_z: res.q_z, fell_back, not_converged: false })
    }
}

/// Min-sum output denoiser: MAP scores by component-wise Newton.
#[derive(Debug, Clone)]
pub struct MinSum {
    pub max_newton_iters: usize,
}

impl Default for MinSum {
    fn default() -> Self {
        Self { max_newton_iters: 50 }
    }
}

impl OutputDenoiser for MinSum {
    fn mode(&self) -> Mode {
        Mode::MinSum
    }

    fn estimate(&self, label: usize, p_hat: &[f64], q_p: &[f64], _ctx: SampleContext) -> Result<OutputEstimate> {
        let r = msa_z_newton(label, p_hat, q_p, self.max_newton_iters)?;
        Ok(OutputEstimate { z_hat: r.z_hat, q_z: r.q_z, fell_back: false, not_converged: !r.converged })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0; 4]);
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax(&[10.0, 0.0, 0.0, 0.0]);
        assert!((p[0] - 1.0 / (1.0 + 3.0 * (-10f64).exp())).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_survives_large_scores() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((ln_softmax_at(&[1000.0, 999.0, -1000.0], 0) - p[0].ln()).abs() < 1e-12);
    }

    #[test]
    fn stream_seeds_differ() {
        let a = SampleContext { iteration: 1, sample: 2, seed: 3 }.stream_seed();
        let b = SampleContext { iteration: 2, sample: 1, seed: 3 }.stream_seed();
        assert_ne!(a, b);
    }
}
