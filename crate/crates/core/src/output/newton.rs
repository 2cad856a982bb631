//! MAP scores by component-wise Newton ascent.

use super::{check_message, ln_softmax_at, softmax};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub z_hat: Vec<f64>,
    pub q_z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm of the objective gradient at `z_hat`.
    pub gradient_norm: f64,
}

/// `−½ Σ_d (z_d − p̂_d)²/q_d + ln p(y|z)`.
pub fn msa_objective(y: usize, z: &[f64], p_hat: &[f64], q_p: &[f64]) -> f64 {
    let quad: f64 = z.iter().zip(p_hat).zip(q_p).map(|((z, p), q)| (z - p).powi(2) / q).sum();
    ln_softmax_at(z, y) - 0.5 * quad
}

/// Gradient of the negated objective and its (negative definite) diagonal
/// curvature of the objective.
pub fn gradient_and_curvature(y: usize, z: &[f64], p_hat: &[f64], q_p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u = softmax(z);
    let g = (0..z.len())
        .map(|d| u[d] - if d == y { 1.0 } else { 0.0 } + (z[d] - p_hat[d]) / q_p[d])
        .collect();
    let h = (0..z.len()).map(|d| u[d] * u[d] - u[d] - 1.0 / q_p[d]).collect();
    (g, h)
}

/// Maximizes [`msa_objective`] with diagonal Newton steps and backtracking.
///
/// Stops when the gradient sup-norm drops below `1e-8` or after `max_iters`
/// steps; in the latter case the best iterate is returned with
/// `converged = false`.
pub fn msa_z_newton(y: usize, p_hat: &[f64], q_p: &[f64], max_iters: usize) -> Result<NewtonResult> {
    check_message(y, p_hat, q_p)?;
    let d = p_hat.len();
    let mut z = p_hat.to_vec();
    let mut obj = msa_objective(y, &z, p_hat, q_p);
    let mut iterations = 0;
    let (mut g, mut h) = gradient_and_curvature(y, &z, p_hat, q_p);
    let mut gnorm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    while gnorm >= 1e-8 && iterations < max_iters {
        iterations += 1;
        // g is the gradient of the negated objective and h < 0, so the ascent
        // direction is g / h
        let dir: Vec<f64> = (0..d).map(|k| g[k] / h[k]).collect();
        let mut alpha = 1.0;
        let tolerance = 4.0 * f64::EPSILON * obj.abs().max(1.0);
        let accepted = loop {
            let cand: Vec<f64> = (0..d).map(|k| z[k] + alpha * dir[k]).collect();
            let val = msa_objective(y, &cand, p_hat, q_p);
            if val >= obj - tolerance {
                break Some((cand, val));
            }
            if alpha <= 1.0 / 1024.0 {
                break None;
            }
            alpha *= 0.5;
        };
        let Some((cand, val)) = accepted else { break };
        z = cand;
        obj = obj.max(val);
        (g, h) = gradient_and_curvature(y, &z, p_hat, q_p);
        gnorm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let u = softmax(&z);
    let q_z = (0..d).map(|k| 1.0 / (1.0 / q_p[k] + u[k] - u[k] * u[k])).collect();
    Ok(NewtonResult { z_hat: z, q_z, iterations, converged: gnorm < 1e-8, gradient_norm: gnorm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vanishing_variance() {
        let p = [0.4, -1.2, 0.0];
        let r = msa_z_newton(0, &p, &[1e-10; 3], 50).unwrap();
        for k in 0..3 {
            assert!((r.z_hat[k] - p[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_at_return() {
        let r = msa_z_newton(2, &[0.3, 0.1, -0.5, 0.8], &[1.0, 0.5, 2.0, 1.5], 50).unwrap();
        assert!(r.converged);
        let (g, _) = gradient_and_curvature(2, &r.z_hat, &[0.3, 0.1, -0.5, 0.8], &[1.0, 0.5, 2.0, 1.5]);
        assert!(g.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn agrees_with_slow_gradient_ascent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let q: Vec<f64> = (0..4).map(|_| rng.random_range(0.3..2.0)).collect();
        let r = msa_z_newton(1, &p, &q, 50).unwrap();
        // step 1/L with L bounding the curvature: max 1/q + 1/2
        let step = 1.0 / (q.iter().map(|v| 1.0 / v).fold(0.0, f64::max) + 0.5);
        let mut z = p.clone();
        for _ in 0..10_000 {
            let (g, _) = gradient_and_curvature(1, &z, &p, &q);
            z.iter_mut().zip(&g).for_each(|(z, g)| *z -= step * g);
        }
        let diff = msa_objective(1, &r.z_hat, &p, &q) - msa_objective(1, &z, &p, &q);
        assert!(diff.abs() < 1e-8, "objective gap {diff}");
    }

    #[test]
    fn iteration_cap_flags() {
        let r = msa_z_newton(0, &[0.0; 4], &[1e3; 4], 2).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.z_hat.iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            p in prop::collection::vec(-3.0f64..3.0, 4),
            z in prop::collection::vec(-3.0f64..3.0, 4),
            q in prop::collection::vec(0.2f64..3.0, 4),
            y in 0usize..4,
        ) {
            let (g, h) = gradient_and_curvature(y, &z, &p, &q);
            let eps = 1e-5;
            for d in 0..4 {
                let shifted = |t: f64| { let mut w = z.clone(); w[d] += t; msa_objective(y, &w, &p, &q) };
                let fd_g = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
                prop_assert!((-g[d] - fd_g).abs() <= 1e-5 * fd_g.abs().max(1e-3));
                let e2 = 1e-3;
                let fd_h = (shifted(e2) - 2.0 * shifted(0.0) + shifted(-e2)) / (e2 * e2);
                prop_assert!((h[d] - fd_h).abs() <= 1e-5 * fd_h.abs(), "{} vs {}", h[d], fd_h);
            }
        }
    }
}
