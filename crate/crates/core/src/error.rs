use thiserror::Error;

#[derive(Debug, Error)]
pub enum SilsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("enumeration budget exceeded: {0:.3e} candidates")]
    Budget(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SilsError {
    /// True for failures of the numerics (or of a budget) rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, SilsError::Numeric(_) | SilsError::Precondition(_) | SilsError::Budget(_))
    }
}

pub type Result<T> = std::result::Result<T, SilsError>;
