use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate variance at iteration {iteration}: {what}")]
    DegenerateVariance { iteration: usize, what: String },

    #[error("message passing diverged at iteration {iteration} (non-finite {what})")]
    Divergence { iteration: usize, what: String },

    #[error("degenerate likelihood: normalization constant {0} is not positive")]
    DegenerateLikelihood(f64),

    #[error("taylor-series moments broke down: {0}")]
    MethodBreakdown(String),

    #[error("integration grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: f64, limit: f64 },

    #[error("mixture fit failed: sup-norm residual {residual} exceeds {limit}")]
    FitFailed { residual: f64, limit: f64 },

    #[error("no 99% energy subset: weight matrix is all zero")]
    ZeroWeights,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
