use alloc::string::String;

/// Errors raised by the core. Physics "nulls" (Pauli blocking, cutoff
/// boundaries, leaving a sector) are `None` values, never errors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid registry: {0}")]
    InvalidRegistry(String),
    #[error("invalid sector: {0}")]
    InvalidSector(String),
    #[error("mode {mode} out of range (registry has {len} modes)")]
    ModeOutOfRange { mode: usize, len: usize },
    #[error("basis lacks required modes: {0}")]
    MissingModes(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator is not flagged Hermitian")]
    NotHermitian,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("singular block: {0}")]
    Singular(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    /// True for failures of an iterative method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }
}
