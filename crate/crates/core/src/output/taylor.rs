//! Second-order Taylor expansion of the likelihood about the message mean.

use super::{check_message, softmax, MomentResult};
use crate::error::{Error, Result};

/// Moments under `p(y|z) ≈ f + gᵀ(z − p̂) + ½(z − p̂)ᵀ diag(H) (z − p̂)`.
///
/// Fails with [`Error::MethodBreakdown`] when the quadratic surrogate
/// integrates to a non-positive constant or yields a negative variance.
pub fn spa_moments_ts(y: usize, p_hat: &[f64], q_p: &[f64]) -> Result<MomentResult> {
    check_message(y, p_hat, q_p)?;
    let d = p_hat.len();
    let u = softmax(p_hat);
    let f = u[y];
    let delta = |k: usize| if k == y { 1.0 } else { 0.0 };
    let g: Vec<f64> = (0..d).map(|k| f * (delta(k) - u[k])).collect();
    let h: Vec<f64> = (0..d).map(|k| f * (delta(k) - u[k]).powi(2) - f * u[k] * (1.0 - u[k])).collect();
    let c = f + 0.5 * h.iter().zip(q_p).map(|(h, q)| h * q).sum::<f64>();
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::MethodBreakdown(format!("Taylor normalizer {c:.3e} is not positive")));
    }
    let mut z_hat = vec![0.0; d];
    let mut q_z = vec![0.0; d];
    for k in 0..d {
        let shift = g[k] * q_p[k] / c;
        z_hat[k] = p_hat[k] + shift;
        // E[(z−p̂)²] = q (1 + H q / C); the centered form avoids cancellation
        q_z[k] = q_p[k] * (1.0 + h[k] * q_p[k] / c) - shift * shift;
        if !(q_z[k] >= 0.0) {
            return Err(Error::MethodBreakdown(format!("Taylor variance {:.3e} for class {k}", q_z[k])));
        }
    }
    Ok(MomentResult { z_hat, q_z, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::moments_bruteforce;

    #[test]
    fn vanishing_variance() {
        let p = [0.2, 0.9, -0.4, 0.0];
        let r = spa_moments_ts(1, &p, &[1e-9; 4]).unwrap();
        assert!((r.c - softmax(&p)[1]).abs() < 1e-8);
        for k in 0..4 {
            assert!((r.z_hat[k] - p[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn accurate_for_small_variance() {
        let p = [1.0, 0.0, 0.0, 0.0];
        let q = [0.01; 4];
        let t = spa_moments_ts(1, &p, &q).unwrap();
        let o = moments_bruteforce(1, &p, &q, 41, 6.0).unwrap();
        for k in 0..4 {
            // compare the likelihood-induced shift, the part the method approximates
            let (ts, or) = (t.z_hat[k] - p[k], o.z_hat[k] - p[k]);
            assert!((ts - or).abs() <= 0.02 * or.abs(), "shift {k}: {ts} vs {or}");
            assert!((t.z_hat[k] - o.z_hat[k]).abs() <= 0.02 * o.z_hat[k].abs().max(q[k].sqrt()));
            assert!((t.q_z[k] - o.q_z[k]).abs() <= 0.02 * o.q_z[k]);
        }
        assert!((t.c - o.c).abs() <= 0.02 * o.c);
    }

    #[test]
    fn large_variance_breaks_down_or_is_far_off() {
        let p = [1.0, 0.0, 0.0, 0.0];
        let q = [4.0; 4];
        let o = moments_bruteforce(1, &p, &q, 41, 6.0).unwrap();
        match spa_moments_ts(1, &p, &q) {
            Err(Error::MethodBreakdown(_)) => {}
            Ok(t) => {
                let err: f64 = (0..4)
                    .map(|k| ((t.z_hat[k] - o.z_hat[k]) / (o.z_hat[k] - p[k])).abs())
                    .fold(0.0, f64::max);
                assert!(err > 0.5, "relative error only {err}");
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
