use thiserror::Error;

/// Errors raised by the lab.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel outside ellipticity band: {0}")]
    KernelBand(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("CFL violation: {0}")]
    Cfl(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last gap {last_gap:.3e})")]
    FixedPointDiverged {
        iterations: usize,
        last_gap: f64,
        gaps: Vec<f64>,
    },

    #[error("request outside stored window: {0}")]
    OutOfWindow(String),

    #[error("empty set: {0}")]
    Empty(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("resolution underflow: {0}")]
    Underflow(String),

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Serde(e.to_string())
    }
}

impl From<bincode::Error> for LabError {
    fn from(e: bincode::Error) -> Self {
        LabError::Serde(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Serde(e.to_string())
    }
}
