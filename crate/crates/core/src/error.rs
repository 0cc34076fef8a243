use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or solver configuration that cannot be realised.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian: relative deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// The eigenvalue spectrum carries no information (e.g. all zeros).
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("dual variable infeasible: block {block} has norm {norm:.6}")]
    Infeasible { block: usize, norm: f64 },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
