use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Computation,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-positive price {value} for series '{label}' at index {index}")]
    NonPositivePrice {
        label: String,
        index: usize,
        value: f64,
    },

    #[error("scale s={scale} exceeds series length T={len}")]
    ScaleTooLarge { scale: usize, len: usize },

    #[error("scale s={scale} too small for polynomial order m={order} (need s >= m + 2)")]
    ScaleTooSmall { scale: usize, order: usize },

    #[error("q=0 is not supported")]
    ZeroQ,

    #[error("negative q={0} is only available in triangle-audit mode")]
    NegativeQ(f64),

    #[error("singular detrending fit in box starting at {start} (s={scale})")]
    SingularFit { start: usize, scale: usize },

    #[error("zero box fluctuation with q={q} < 0 (box {index}) makes the q-average diverge")]
    DivergentMoment { q: f64, index: usize },

    #[error("series '{0}' has zero fluctuation (constant input?)")]
    ZeroFluctuation(String),

    #[error("correlation {value} out of range for pair ('{a}', '{b}')")]
    OutOfRange { a: String, b: String, value: f64 },

    #[error("non-finite distance between '{a}' and '{b}'")]
    NonFiniteDistance { a: String, b: String },

    #[error("zero-norm vector in scalar product")]
    ZeroNorm,

    #[error("{context}: {source}")]
    Pair {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_pair(self, a: &str, b: &str) -> Self {
        Error::Pair {
            context: format!("pair ('{a}', '{b}')"),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Invalid(_)
            | Error::NonPositivePrice { .. }
            | Error::ScaleTooLarge { .. }
            | Error::ScaleTooSmall { .. }
            | Error::ZeroQ
            | Error::NegativeQ(_)
            | Error::Config(_) => ErrorClass::Validation,
            Error::SingularFit { .. }
            | Error::DivergentMoment { .. }
            | Error::ZeroFluctuation(_)
            | Error::OutOfRange { .. }
            | Error::NonFiniteDistance { .. }
            | Error::ZeroNorm => ErrorClass::Computation,
            Error::Pair { source, .. } => source.class(),
            Error::Io { .. } | Error::Json(_) => ErrorClass::Io,
            Error::Csv(e) => {
                if e.is_io_error() {
                    ErrorClass::Io
                } else {
                    ErrorClass::Validation
                }
            }
        }
    }
}
