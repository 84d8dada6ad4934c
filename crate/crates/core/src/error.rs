use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by operators, objectives, steppers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    /// The iteration produced a non-finite quantity. Runs record this as
    /// status `diverge` rather than failing.
    #[error("diverged: {0}")]
    Diverged(String),

    #[error("lower bound violated: f + C = {0} is not positive")]
    ShiftViolated(f64),

    #[error("splitting lower bound violated: g + C_g = {0} is not positive")]
    SplittingBoundViolated(f64),

    #[error("objective does not support {0}")]
    Unsupported(&'static str),

    #[error("direction is not a descent direction (slope {0})")]
    NotDescent(f64),

    #[error("wolfe-not-found after {0} halvings")]
    WolfeNotFound(usize),

    #[error("at-minimum: residual is zero")]
    AtMinimum,

    #[error("empty batch")]
    EmptyBatch,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Diverged(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
