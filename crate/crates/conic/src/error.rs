use thiserror::Error;

pub type Result<T> = std::result::Result<T, ConicError>;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("failed to write problem dump: {0}")]
    Dump(#[from] serde_json::Error),
}
