//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Correlation has no usable peak (flat or empty).
    #[error("degenerate correlation peak: {0}")]
    DegeneratePeak(String),

    /// Correlation peak quality fell below the detection threshold.
    #[error("detection failed: peak quality {peak_quality_db:.1} dB below threshold {threshold_db:.1} dB")]
    DetectionFailed {
        peak_quality_db: f64,
        threshold_db: f64,
    },

    /// Anchor geometry cannot support a position solution.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// OOK envelope could not be decoded back to an address.
    #[error("address decode failed: {0}")]
    Decode(String),

    /// A waveform or metrics file did not match the expected format.
    #[error("file format error: {0}")]
    Format(String),

    /// Scenario configuration file is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
