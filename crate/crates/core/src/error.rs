use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// The divergence-corrected direction `D(r) − α·r` vanished, i.e. the
    /// denoiser acted linearly on its input and carries no extrinsic information.
    #[error("degenerate extrinsic direction (‖u‖ = {norm:e})")]
    DegenerateExtrinsic { norm: f64, direction: Vec<f64> },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed PGM at byte {offset}: {message}")]
    Pgm { offset: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    /// True for numerical failures of the recovery itself.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateExtrinsic { .. } | Error::SolveFailure(_) | Error::NonFinite(_)
        )
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
