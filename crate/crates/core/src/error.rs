use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample window holds {actual} outputs, the test expects {expected}")]
    WindowLength { expected: usize, actual: usize },

    /// `(θ_h + 1) − R_h (2θ_h + 1)² ≤ 0`: output variance is too large for the
    /// side-payment bound algebra.
    #[error("side-payment bounds are degenerate (denominator {denominator:.6e} <= 0)")]
    DegenerateAlphaBounds { denominator: f64 },

    #[error("horizon {horizon} is shorter than the detection window {window}")]
    HorizonTooShort { horizon: usize, window: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot sweep `{0}`: not a scalar parameter")]
    NonScalarSweep(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Serialization { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Validation failures are the caller's fault; everything else is a
    /// runtime or I/O failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Serialization { .. })
    }
}
