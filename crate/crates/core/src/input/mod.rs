//! Prior-side (input) denoisers and their online hyperparameter tuners.

mod bg;
mod gm1d;
mod laplace;
mod sure;

pub use bg::{bg_denoise, bg_log_likelihood, em_update_bg, BernoulliGaussian, BgPosterior, BgPrior};
pub use gm1d::{fit_gm_1d, Gm1d};
pub use laplace::{laplace_denoise, Laplacian};
pub use sure::{sure_objective, sure_objective_derivative, sure_tune_lambda, SureFit};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gamp::Mode;

/// Posterior estimate of the weights given pseudo-observations `r̂`.
#[derive(Debug, Clone)]
pub struct InputEstimate {
    pub x_hat: Array2<f64>,
    /// Per-entry variances, averaged by the engine into the scalar `q_x`.
    pub q_x_entries: Array2<f64>,
}

/// Current values of the prior's tunable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "snake_case")]
pub enum Hyperparameters {
    Laplace { lambda: f64 },
    BernoulliGaussian { beta: Vec<f64>, mean: Vec<f64>, var: Vec<f64> },
    None,
}

/// Scalar-variance input denoiser driven by the message-passing engine.
///
/// The engine calls `tune_before`, then `denoise`, then `tune_after` once per
/// iteration.
pub trait InputDenoiser {
    fn mode(&self) -> Mode;

    /// Starting estimate `x̂(0)` (the prior mean) and starting variance `q_x(0)`.
    fn initial_estimate(&self, num_features: usize, num_classes: usize) -> (Array2<f64>, f64);

    fn tune_before(&mut self, _r_hat: &Array2<f64>, _q_r: f64) -> Result<()> {
        Ok(())
    }

    fn denoise(&mut self, r_hat: &Array2<f64>, q_r: f64) -> Result<InputEstimate>;

    fn tune_after(&mut self, _r_hat: &Array2<f64>, _q_r: f64) -> Result<()> {
        Ok(())
    }

    fn hyperparameters(&self) -> Hyperparameters;
}
