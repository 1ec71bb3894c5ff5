use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("matrix is singular to working precision (smallest eigenvalue {min_eig:e})")]
    Singular { min_eig: f64 },

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("invalid distribution or experiment spec: {0}")]
    Spec(String),

    #[error("need at least {min} samples, got {got}")]
    InsufficientSamples { got: usize, min: usize },

    #[error("no applicable bound: {0}")]
    Unsupported(String),

    #[error("not calibratable: {0}")]
    NotCalibratable(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Errors caused by a config that is well-formed but asks for something
    /// inconsistent (wrong regime, unsupported family, ...).
    pub fn is_spec_error(&self) -> bool {
        matches!(
            self,
            Error::Regime(_)
                | Error::Spec(_)
                | Error::Unsupported(_)
                | Error::NotCalibratable(_)
                | Error::NotPsd { .. }
                | Error::Singular { .. }
                | Error::InsufficientSamples { .. }
                | Error::InvalidInput(_)
                | Error::Index { .. }
        )
    }
}
