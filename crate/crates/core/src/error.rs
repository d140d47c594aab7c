use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. `field` is the dotted key path.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("config parse error: {0}")]
    ConfigSyntax(String),

    #[error("bit stream length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("delay {tau:e} s is outside the valid range |tau| < {limit:e} s")]
    DelayOutOfRange { tau: f64, limit: f64 },

    #[error("delay {0:e} s is not aligned to the sample grid")]
    DelayNotSampleAligned(f64),

    #[error("measurement failed: {0}")]
    Measurement(String),

    #[error("target `{0}` echo falls outside the receive window")]
    TargetOutsideWindow(String),

    #[error("sampling violation: {0}")]
    Sampling(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no peak found: {0}")]
    NoPeak(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than
    /// runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. }
                | Error::MissingKey(_)
                | Error::UnknownKey(_)
                | Error::ConfigSyntax(_)
        )
    }
}
