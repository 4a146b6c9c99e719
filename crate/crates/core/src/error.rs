use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not strongly connected: {0}")]
    NotStronglyConnected(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("cannot build weights: {0}")]
    Weights(String),

    #[error("power iteration did not converge after {iterations} steps (residual {residual:e}); matrix is likely not primitive")]
    EigenvectorNotConverged { iterations: usize, residual: f64 },

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("delay {delay} exceeds the channel bound tau_max = {tau_max}")]
    DelayExceedsBound { delay: u32, tau_max: u32 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Smoothness constants violate the homogeneity condition required by the
    /// closed-form step size.
    #[error("step-size condition violated: (sum l)^2 / (N sum l^2) = {ratio:.6} must exceed 3/4")]
    StepSizeCondition { ratio: f64 },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing trace: {0}")]
    MissingTrace(String),

    #[error("plot: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
