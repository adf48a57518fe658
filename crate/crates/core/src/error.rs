use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented invariant. `field` names the
    /// offending input so callers can surface field-level messages.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Support metrics are undefined when the reference signal is all-zero
    /// or all-nonzero.
    #[error("degenerate support: signal has {nonzeros} nonzero of {len} entries")]
    DegenerateSupport { nonzeros: usize, len: usize },

    /// A saddle-point search pushed against its expanded bracket limits.
    #[error("bracket exhausted for `{variable}` after {expansions} expansions at {endpoint}")]
    BracketExhausted {
        variable: &'static str,
        expansions: usize,
        endpoint: f64,
    },

    #[error("saddle solve failed: {0}")]
    SaddleFailure(String),

    /// A negative variance prediction indicates the saddle solver returned a
    /// spurious point; it is never a valid output.
    #[error("predicted mean squared error is negative ({value}); saddle point is unreliable")]
    NegativePrediction { value: f64 },

    #[error("no grid point evaluated successfully")]
    AllGridPointsInvalid,
}

impl Error {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }
}
