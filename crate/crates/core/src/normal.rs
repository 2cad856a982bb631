//! Standard normal density and distribution helpers with tail-safe logs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point the asymptotic expansion replaces `erfc`.
const ASYMPTOTIC_BELOW: f64 = -30.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln N(x; mean, var)`.
pub fn ln_gauss(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

pub fn gauss(x: f64, mean: f64, var: f64) -> f64 {
    ln_gauss(x, mean, var).exp()
}

/// `ln Φ(x)`, accurate in both tails.
pub fn ln_cdf(x: f64) -> f64 {
    if x > 5.0 {
        (-cdf(-x)).ln_1p()
    } else if x > ASYMPTOTIC_BELOW {
        cdf(x).ln()
    } else {
        ln_pdf(x) - (-x).ln() + tail_series(x).ln()
    }
}

/// Inverse Mills ratio `φ(x)/Φ(x)`.
pub fn mills_ratio(x: f64) -> f64 {
    if x > ASYMPTOTIC_BELOW {
        (ln_pdf(x) - ln_cdf(x)).exp()
    } else {
        -x / tail_series(x)
    }
}

// Φ(x) ≈ φ(x)/(-x) · (1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸) for x → -∞.
fn tail_series(x: f64) -> f64 {
    let t = 1.0 / (x * x);
    1.0 - t * (1.0 - 3.0 * t * (1.0 - 5.0 * t * (1.0 - 7.0 * t)))
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
