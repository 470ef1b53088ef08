use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants map onto the command-line exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("time {t} is outside the observation window [0, {horizon}]")]
    Range { t: f64, horizon: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric error at index {index}: {message}")]
    Numeric { index: usize, message: String },

    #[error("intensity is zero at event {index}; Pearson weight undefined")]
    ZeroIntensity { index: usize },

    #[error("too few events ({found}) to identify the model; at least {required} needed")]
    UnderIdentified { found: usize, required: usize },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("simulation exploded: more than {limit} events accepted")]
    Explosion { limit: usize },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numeric(index: usize, msg: impl Into<String>) -> Self {
        Error::Numeric {
            index,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 validation, 2 numeric/convergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Range { .. }
            | Error::Usage(_)
            | Error::UnderIdentified { .. }
            | Error::Parse { .. } => 1,
            Error::Numeric { .. }
            | Error::ZeroIntensity { .. }
            | Error::NonConvergence(_)
            | Error::Explosion { .. }
            | Error::Undefined(_) => 2,
            Error::Io { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
