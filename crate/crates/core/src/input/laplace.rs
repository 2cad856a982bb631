use ndarray::Array2;

use super::{sure_tune_lambda, Hyperparameters, InputDenoiser, InputEstimate};
use crate::error::{Error, Result};
use crate::gamp::Mode;

/// Soft thresholding at `λ·q_r`. Variance is `q_r` on the support and 0 elsewhere.
pub fn laplace_denoise(r_hat: &Array2<f64>, q_r: f64, lambda: f64) -> (Array2<f64>, Array2<f64>) {
    let t = lambda * q_r;
    let x = r_hat.mapv(|r| {
        let mag = r.abs() - t;
        if mag > 0.0 {
            mag.copysign(r)
        } else {
            0.0
        }
    });
    let q = x.mapv(|v| if v != 0.0 { q_r } else { 0.0 });
    (x, q)
}

/// Min-sum input denoiser under an i.i.d. Laplacian prior, with optional
/// SURE re-tuning of `λ` before every denoising step.
#[derive(Debug, Clone)]
pub struct Laplacian {
    lambda: f64,
    sure_components: Option<usize>,
}

impl Laplacian {
    pub fn fixed(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda, sure_components: None })
    }

    /// SURE-tuned prior starting from `initial_lambda`, with an `components`-term
    /// Gaussian mixture model of `r̂`.
    pub fn sure(initial_lambda: f64, components: usize) -> Result<Self> {
        let mut me = Self::fixed(initial_lambda)?;
        me.sure_components = Some(components.max(1));
        Ok(me)
    }

    /// `λ` giving prior variance `2/λ²` equal to `(D-1)` divided by the mean row energy.
    pub fn scale_matched_lambda(num_classes: usize, num_samples: usize, frobenius_sq: f64) -> f64 {
        let row_energy = frobenius_sq / num_samples as f64;
        if row_energy > 0.0 {
            (2.0 * row_energy / (num_classes as f64 - 1.0)).sqrt()
        } else {
            1.0
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl InputDenoiser for Laplacian {
    fn mode(&self) -> Mode {
        Mode::MinSum
    }

    fn initial_estimate(&self, num_features: usize, num_classes: usize) -> (Array2<f64>, f64) {
        (Array2::zeros((num_features, num_classes)), 2.0 / (self.lambda * self.lambda))
    }

    fn tune_before(&mut self, r_hat: &Array2<f64>, q_r: f64) -> Result<()> {
        if let Some(l) = self.sure_components {
            let samples: Vec<f64> = r_hat.iter().copied().collect();
            let fit = sure_tune_lambda(&samples, q_r, l)?;
            // a threshold that removes every entry is not adopted
            if fit.lambda > 0.0 && fit.lambda < fit.lambda_max {
                self.lambda = fit.lambda;
            }
        }
        Ok(())
    }

    fn denoise(&mut self, r_hat: &Array2<f64>, q_r: f64) -> Result<InputEstimate> {
        if !(q_r > 0.0) {
            return Err(Error::InvalidInput(format!("q_r must be positive, got {q_r}")));
        }
        let (x_hat, q_x_entries) = laplace_denoise(r_hat, q_r, self.lambda);
        Ok(InputEstimate { x_hat, q_x_entries })
    }

    fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters::Laplace { lambda: self.lambda }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        let (x, q) = laplace_denoise(&array![[3.0, -0.5]], 1.0, 1.0);
        assert_eq!(x, array![[2.0, 0.0]]);
        assert_eq!(q, array![[1.0, 0.0]]);
        let (x, _) = laplace_denoise(&array![[-3.0]], 0.5, 2.0);
        assert_eq!(x, array![[-2.0]]);
    }

    #[test]
    fn pure_noise_keeps_lambda() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        let r = Array2::from_shape_fn((400, 3), |_| 0.5 * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
        let mut den = Laplacian::sure(2.5, 3).unwrap();
        den.tune_before(&r, 1.0).unwrap();
        assert_eq!(den.lambda(), 2.5);
        let mut sparse = r.clone();
        for i in 0..12 {
            sparse[[i, 0]] = if i % 2 == 0 { 9.0 } else { -9.0 };
        }
        den.tune_before(&sparse, 1.0).unwrap();
        assert_ne!(den.lambda(), 2.5);
    }

    #[test]
    fn zero_lambda_rejected() {
        assert!(Laplacian::fixed(0.0).is_err());
        assert!(Laplacian::fixed(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn soft_threshold_is_odd_monotone_and_lipschitz(
            a in -20.0f64..20.0, b in -20.0f64..20.0, q in 0.01f64..3.0, lambda in 0.01f64..5.0,
        ) {
            let (x, _) = laplace_denoise(&array![[a, b, -a]], q, lambda);
            prop_assert_eq!(x[[0, 0]], -x[[0, 2]]);
            prop_assert!((x[[0, 0]] - x[[0, 1]]).abs() <= (a - b).abs() + 1e-12);
            if a <= b {
                prop_assert!(x[[0, 0]] <= x[[0, 1]]);
            }
        }
    }
}
