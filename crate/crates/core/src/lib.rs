//! Sparse multinomial logistic regression by simplified hybrid generalized
//! approximate message passing (SHyGAMP).
//!
//! The engine in [`gamp`] alternates an input denoiser (prior on the weight
//! matrix, see [`input`]) and an output denoiser (soft-max likelihood on the
//! class scores, see [`output`]). [`synth`] generates the matched synthetic
//! benchmark and evaluates expected test error; [`io`] reads datasets and
//! writes reports.

pub mod error;
pub mod gamp;
pub mod input;
pub mod io;
pub mod model;
pub mod normal;
pub mod output;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use gamp::{run, run_with_observer, GampConfig, GampState, IterationRecord, Mode, TrainResult, Tuner};
pub use model::{Dataset, Features, WeightMatrix};
pub use train::{train, TrainOptions};
