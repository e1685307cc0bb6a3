use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fluid path does not reach {target} within t_max = {t_max}")]
    NoHitting { target: f64, t_max: f64 },

    #[error("degenerate normalization: 1 + gamma(1) = {0}")]
    DegenerateNormalization(f64),

    #[error("negative diffusion rate {rate} at t = {t}")]
    NegativeDiffusion { t: f64, rate: f64 },

    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid exponent p = {0}; need p > 1")]
    InvalidP(f64),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
