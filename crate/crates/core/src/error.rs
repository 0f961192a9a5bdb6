use thiserror::Error;

use crate::vec2::Vec2;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure classes of the laboratory. Each class maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis violated: {inequality} (worst violation {magnitude:.3e})")]
    HypothesisViolation { inequality: String, magnitude: f64 },

    #[error("degenerate family: {0}")]
    DegenerateFamily(String),

    #[error("minimization did not converge (best iterate {best:?}, value {value})")]
    OptimizationFailure { best: Vec2, value: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("solver bug: {0}")]
    SolverBug(String),

    #[error("statistics inconsistency: {0}")]
    StatisticsInconsistency(String),

    #[error("cross-pipeline inconsistency: {0}")]
    Inconsistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error class, used for exit codes and verdict bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Hypothesis,
    Solver,
    Inconsistency,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Precondition(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => {
                ErrorClass::Config
            }
            Error::HypothesisViolation { .. } | Error::DegenerateFamily(_) => ErrorClass::Hypothesis,
            Error::OptimizationFailure { .. }
            | Error::UnsupportedRegime(_)
            | Error::SolverFailure(_)
            | Error::SolverBug(_) => ErrorClass::Solver,
            Error::StatisticsInconsistency(_) | Error::Inconsistency(_) => ErrorClass::Inconsistency,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
