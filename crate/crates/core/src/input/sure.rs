//! SURE-driven choice of the soft-threshold scale from a Gaussian-mixture model of `r̂`.

use super::gm1d::{fit_gm_1d, Gm1d};
use crate::error::Result;
use crate::normal;

const BISECTION_ITERS: usize = 60;

/// Outcome of a SURE tuning step.
#[derive(Debug, Clone)]
pub struct SureFit {
    pub lambda: f64,
    pub lambda_max: f64,
    pub gm: Gm1d,
}

/// Expected SURE penalty `J(λ)` of soft thresholding at `λ·q_r` when `r` follows `gm`.
pub fn sure_objective(lambda: f64, gm: &Gm1d, q_r: f64) -> f64 {
    let t = lambda * q_r;
    let mut inside = 0.0;
    let mut second = 0.0;
    for (w, m, v) in gm.components() {
        let s = v.sqrt();
        let (a, b) = ((-t - m) / s, (t - m) / s);
        let p = normal::cdf(b) - normal::cdf(a);
        let (pa, pb) = (normal::pdf(a), normal::pdf(b));
        inside += w * p;
        second += w * ((m * m + v) * p + 2.0 * m * s * (pa - pb) + v * (a * pa - b * pb));
    }
    t * t * (1.0 - inside) + second - 2.0 * q_r * inside
}

/// `dJ/dλ = 2λq²(1 − Pr{|r| < λq}) − 2q²(p(λq) + p(−λq))`.
pub fn sure_objective_derivative(lambda: f64, gm: &Gm1d, q_r: f64) -> f64 {
    let t = lambda * q_r;
    let inside = gm.cdf(t) - gm.cdf(-t);
    2.0 * lambda * q_r * q_r * (1.0 - inside) - 2.0 * q_r * q_r * (gm.pdf(t) + gm.pdf(-t))
}

/// Fit an `components`-term mixture to `r̂` (variance floor `q_r`) and bisect
/// `dJ/dλ` on `[0, max|r̂|/q_r]`. Without a sign change the upper end is returned.
pub fn sure_tune_lambda(r_hat: &[f64], q_r: f64, components: usize) -> Result<SureFit> {
    let gm = fit_gm_1d(r_hat, components, q_r)?;
    let lambda_max = r_hat.iter().fold(0.0f64, |m, r| m.max(r.abs())) / q_r;
    if lambda_max == 0.0 {
        return Ok(SureFit { lambda: 0.0, lambda_max, gm });
    }
    if sure_objective_derivative(lambda_max, &gm, q_r) <= 0.0 {
        return Ok(SureFit { lambda: lambda_max, lambda_max, gm });
    }
    let (mut lo, mut hi) = (0.0, lambda_max);
    if sure_objective_derivative(lo, &gm, q_r) >= 0.0 {
        return Ok(SureFit { lambda: 0.0, lambda_max, gm });
    }
    for _ in 0..BISECTION_ITERS {
        if hi - lo < 1e-9 * lambda_max {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sure_objective_derivative(mid, &gm, q_r) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SureFit { lambda: 0.5 * (lo + hi), lambda_max, gm })
}
