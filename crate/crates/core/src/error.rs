use thiserror::Error;

/// Errors raised across the allocation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite argument {0}")]
    Domain(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid distortion table: {0}")]
    Table(String),

    #[error("rate {rate} outside table range [{min}, {max}]")]
    RateOutOfRange { rate: f64, min: f64, max: f64 },

    #[error("duality transform infeasible: {0}")]
    DualityInfeasible(String),

    #[error("convex subproblem infeasible: {0}")]
    Infeasible(String),

    #[error("successive convex approximation failed: {0}")]
    Sca(String),

    #[error("logistic fit failed: {0}")]
    Fit(String),

    #[error("baseline not applicable: {0}")]
    BaselineInapplicable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
