use thiserror::Error;

#[derive(Debug, Error)]
pub enum CombError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (max |A - A^dagger| = {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid step index {index} for a {steps}-step process")]
    InvalidStep { index: usize, steps: usize },
    #[error("prefix has {got} states, step {step} needs {need}")]
    BadPrefix {
        step: usize,
        got: usize,
        need: usize,
    },
    #[error("comb validation failed at level {level}: residual {residual:.3e}")]
    CombInvalid { level: usize, residual: f64 },
    #[error("invalid dilation: {0}")]
    InvalidDilation(String),
    #[error("malformed process document: {0}")]
    Parse(String),
    #[error("unsupported process document version {0:?}")]
    UnsupportedVersion(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CombError>;
