//! Command-line workflows for the box-constrained elastic net: theory
//! predictions, Monte-Carlo simulation, parameter sweeps, and regularizer
//! tuning, all emitting reproducible tabular output.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

/// Process-level error classification; maps onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable/invalid config, I/O trouble (exit code 1).
    Validation(String),
    /// Saddle or solver failure (exit code 2).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl From<boxen::Error> for CliError {
    fn from(e: boxen::Error) -> Self {
        use boxen::Error::*;
        match &e {
            BracketExhausted { .. } | SaddleFailure(_) | NegativePrediction { .. }
            | AllGridPointsInvalid => CliError::Numerical(e.to_string()),
            InvalidParam { .. } | DimensionMismatch { .. } | DegenerateSupport { .. } => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
