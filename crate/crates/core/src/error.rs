use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    OutOfBounds(String),

    /// The path skeleton has no paths, the link is fully blocked.
    #[error("path skeleton is empty (link blocked)")]
    Blocked,

    #[error("path skeleton unavailable for grid {0}")]
    SkeletonUnavailable(i64),

    #[error("no feasible threshold: every candidate violates the query-budget constraint")]
    Infeasible,

    #[error("value iteration did not converge within {0} sweeps")]
    NonConvergence(usize),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}
