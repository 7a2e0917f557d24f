use thiserror::Error;

/// Errors raised by the sampling library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A Gram-type matrix is numerically non invertible.
    #[error("singular Gram matrix (condition estimate {condition:e})")]
    SingularGram { condition: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("point is off the manifold (|xi| = {residual:e})")]
    OffManifold { residual: f64 },

    /// Truncated momentum sampling gave up; the cap is too small for the dimension.
    #[error("truncated momentum sampling exceeded {trials} trials")]
    RejectionBudgetExceeded { trials: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user configuration rather than by a run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::InvalidParams(_) | Error::UnknownModel(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
