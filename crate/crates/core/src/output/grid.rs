//! Grid integration of the score posterior.

use super::{check_message, ln_softmax_at, MomentResult};
use crate::error::{Error, Result};
use crate::normal;

const NI_GRID_LIMIT: f64 = 1e8;
const BRUTE_MAX_CLASSES: usize = 5;

fn axis(p: f64, q: f64, points: usize, radius: f64) -> (Vec<f64>, Vec<f64>) {
    let sd = q.sqrt();
    let nodes: Vec<f64> = (0..points).map(|j| p + sd * radius * (-1.0 + 2.0 * j as f64 / (points - 1) as f64)).collect();
    let weights = nodes
        .iter()
        .enumerate()
        .map(|(j, &z)| if j == 0 || j == points - 1 { 0.5 } else { 1.0 } * normal::gauss(z, p, q))
        .collect();
    (nodes, weights)
}

struct Ni<'a> {
    y: usize,
    nodes: &'a [Vec<f64>],
    weights: &'a [Vec<f64>],
    /// `exp(z − shift)` per node.
    expz: &'a [Vec<f64>],
    /// Accumulated `Σ W·p(y|z)` per (dimension, node).
    mass: Vec<Vec<f64>>,
}

impl Ni<'_> {
    /// Returns the sum over the subtree below `level` of (weights at levels
    /// `≥ level`)·likelihood, and adds each node's share into `mass`.
    fn walk(&mut self, level: usize, w_before: f64, exp_sum: f64, numerator: f64) -> f64 {
        let last = self.nodes.len() - 1;
        let k = self.nodes[level].len();
        let mut total = 0.0;
        if level == last {
            for j in 0..k {
                let e = self.expz[level][j];
                let num = if self.y == level { e } else { numerator };
                let v = self.weights[level][j] * num / (exp_sum + e);
                self.mass[level][j] += w_before * v;
                total += v;
            }
            return total;
        }
        for j in 0..k {
            let w = self.weights[level][j];
            let e = self.expz[level][j];
            let num = if self.y == level { e } else { numerator };
            let sub = self.walk(level + 1, w_before * w, exp_sum + e, num);
            self.mass[level][j] += w_before * w * sub;
            total += w * sub;
        }
        total
    }
}

/// Trapezoid grid integration on `p̂_d ± radius·sd` with `points` nodes per
/// dimension.
pub fn spa_moments_ni(y: usize, p_hat: &[f64], q_p: &[f64], points: usize, radius: f64) -> Result<MomentResult> {
    check_message(y, p_hat, q_p)?;
    let d = p_hat.len();
    if points < 2 || !(radius > 0.0) {
        return Err(Error::InvalidInput("grid needs at least 2 points and a positive radius".into()));
    }
    let size = (points as f64).powi(d as i32);
    if size > NI_GRID_LIMIT {
        return Err(Error::GridTooLarge { points: size, limit: NI_GRID_LIMIT });
    }
    let (nodes, weights): (Vec<_>, Vec<_>) = (0..d).map(|k| axis(p_hat[k], q_p[k], points, radius)).unzip();
    let shift = nodes.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let expz: Vec<Vec<f64>> = nodes.iter().map(|row| row.iter().map(|&z| (z - shift).exp()).collect()).collect();
    let mut ni = Ni { y, nodes: &nodes, weights: &weights, expz: &expz, mass: vec![vec![0.0; points]; d] };
    ni.walk(0, 1.0, 0.0, 0.0);
    let norm: f64 = ni.mass[0].iter().sum();
    let w_total: f64 = weights.iter().map(|w| w.iter().sum::<f64>()).product();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateLikelihood(norm));
    }
    let mut z_hat = vec![0.0; d];
    let mut q_z = vec![0.0; d];
    for k in 0..d {
        let m1: f64 = ni.mass[k].iter().zip(&nodes[k]).map(|(m, z)| m * z).sum::<f64>() / norm;
        let m2: f64 = ni.mass[k].iter().zip(&nodes[k]).map(|(m, z)| m * z * z).sum::<f64>() / norm;
        z_hat[k] = m1;
        q_z[k] = (m2 - m1 * m1).max(0.0);
    }
    Ok(MomentResult { z_hat, q_z, c: norm / w_total })
}

/// Dense-grid reference evaluation: every grid point visited explicitly.
/// Limited to `D ≤ 5`.
pub fn moments_bruteforce(y: usize, p_hat: &[f64], q_p: &[f64], points: usize, radius: f64) -> Result<MomentResult> {
    check_message(y, p_hat, q_p)?;
    let d = p_hat.len();
    if d > BRUTE_MAX_CLASSES {
        return Err(Error::GridTooLarge { points: (points as f64).powi(d as i32), limit: (points as f64).powi(5) });
    }
    if points < 2 || !(radius > 0.0) {
        return Err(Error::InvalidInput("grid needs at least 2 points and a positive radius".into()));
    }
    let h: Vec<f64> = q_p.iter().map(|q| 2.0 * radius * q.sqrt() / (points - 1) as f64).collect();
    let mut idx = vec![0usize; d];
    let mut z = vec![0.0; d];
    let (mut s0, mut w0) = (0.0, 0.0);
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let total = points.pow(d as u32);
    for _ in 0..total {
        let mut ln_w = 0.0;
        for k in 0..d {
            z[k] = p_hat[k] - radius * q_p[k].sqrt() + idx[k] as f64 * h[k];
            let end = idx[k] == 0 || idx[k] == points - 1;
            ln_w += normal::ln_gauss(z[k], p_hat[k], q_p[k]) + if end { 0.5f64.ln() } else { 0.0 } + h[k].ln();
        }
        let w = ln_w.exp();
        let f = (ln_w + ln_softmax_at(&z, y)).exp();
        w0 += w;
        s0 += f;
        for k in 0..d {
            s1[k] += f * z[k];
            s2[k] += f * z[k] * z[k];
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < points {
                break;
            }
            *slot = 0;
        }
    }
    if !(s0 > 0.0) {
        return Err(Error::DegenerateLikelihood(s0));
    }
    let z_hat: Vec<f64> = s1.iter().map(|v| v / s0).collect();
    let q_z = s2.iter().zip(&z_hat).map(|(v, m)| (v / s0 - m * m).max(0.0)).collect();
    Ok(MomentResult { z_hat, q_z, c: s0 / w0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-class reference through the difference variable γ = z_y − z_d:
    /// γ ~ N(p_y − p_d, q_y + q_d), likelihood σ(γ), and the posterior of z
    /// follows from the linear-Gaussian relation to γ.
    fn two_class_reference(y: usize, p: [f64; 2], q: [f64; 2]) -> ([f64; 2], [f64; 2], f64) {
        let o = 1 - y;
        let mean = p[y] - p[o];
        let var = q[y] + q[o];
        let sd = var.sqrt();
        let n = 200_001;
        let h = 24.0 * sd / (n - 1) as f64;
        let (mut c, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let g = mean - 12.0 * sd + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * h * normal::gauss(g, mean, var) / (1.0 + (-g).exp());
            c += w;
            m1 += w * g;
            m2 += w * g * g;
        }
        let (g1, g2) = (m1 / c, m2 / c - (m1 / c).powi(2));
        let mut z = [0.0; 2];
        let mut v = [0.0; 2];
        // z_k = p_k + (cov(z_k, γ)/var)(γ − mean) + independent residual
        for (k, sign) in [(y, 1.0), (o, -1.0)] {
            let beta = sign * q[k] / var;
            z[k] = p[k] + beta * (g1 - mean);
            v[k] = q[k] - beta * beta * var + beta * beta * g2;
        }
        (z, v, c)
    }

    #[test]
    fn two_classes_match_difference_reduction() {
        let (z, v, c) = two_class_reference(0, [0.4, -0.3], [0.8, 1.3]);
        let ni = spa_moments_ni(0, &[0.4, -0.3], &[0.8, 1.3], 201, 8.0).unwrap();
        let bf = moments_bruteforce(0, &[0.4, -0.3], &[0.8, 1.3], 201, 8.0).unwrap();
        for k in 0..2 {
            assert!((ni.z_hat[k] - z[k]).abs() < 1e-6, "{} vs {}", ni.z_hat[k], z[k]);
            assert!((ni.q_z[k] - v[k]).abs() < 1e-6);
            assert!((bf.z_hat[k] - z[k]).abs() < 1e-6);
            assert!((bf.q_z[k] - v[k]).abs() < 1e-6);
        }
        assert!((ni.c - c).abs() < 1e-6 && (bf.c - c).abs() < 1e-6);
    }

    #[test]
    fn hierarchical_sum_matches_plain_grid() {
        let p = [0.2, -0.5, 1.1];
        let q = [0.7, 1.4, 0.3];
        for y in 0..3 {
            let a = spa_moments_ni(y, &p, &q, 9, 4.0).unwrap();
            let b = moments_bruteforce(y, &p, &q, 9, 4.0).unwrap();
            for k in 0..3 {
                assert!((a.z_hat[k] - b.z_hat[k]).abs() < 1e-12);
                assert!((a.q_z[k] - b.q_z[k]).abs() < 1e-12);
            }
            assert!((a.c - b.c).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grid_close_to_fine_grid() {
        let p = [0.5, 0.0, -0.5];
        let q = [1.0; 3];
        let coarse = spa_moments_ni(0, &p, &q, 7, 4.0).unwrap();
        let fine = spa_moments_ni(0, &p, &q, 41, 4.0).unwrap();
        for k in 0..3 {
            assert!((coarse.z_hat[k] - fine.z_hat[k]).abs() <= 0.03 * fine.z_hat[k].abs().max(0.1));
            assert!((coarse.q_z[k] - fine.q_z[k]).abs() <= 0.03 * fine.q_z[k]);
        }
    }

    #[test]
    fn vanishing_variance() {
        let p = [0.3, -1.0, 2.0];
        for r in [spa_moments_ni(2, &p, &[1e-10; 3], 7, 4.0).unwrap(), moments_bruteforce(2, &p, &[1e-10; 3], 41, 6.0).unwrap()] {
            for k in 0..3 {
                assert!((r.z_hat[k] - p[k]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn bruteforce_refinement_is_stable() {
        let p = [1.0, 0.0, 0.0];
        let q = [1.0; 3];
        let a = moments_bruteforce(1, &p, &q, 41, 6.0).unwrap();
        let b = moments_bruteforce(1, &p, &q, 81, 6.0).unwrap();
        for k in 0..3 {
            assert!((a.z_hat[k] - b.z_hat[k]).abs() <= 1e-3 * b.z_hat[k].abs().max(1e-2));
            assert!((a.q_z[k] - b.q_z[k]).abs() <= 1e-3 * b.q_z[k]);
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(spa_moments_ni(0, &[0.0; 10], &[1.0; 10], 7, 4.0), Err(Error::GridTooLarge { .. })));
        assert!(spa_moments_ni(0, &[0.0; 9], &[1.0; 9], 7, 4.0).is_ok());
        assert!(matches!(moments_bruteforce(0, &[0.0; 6], &[1.0; 6], 41, 6.0), Err(Error::GridTooLarge { .. })));
    }
}
