use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, config files, or CLI arguments.
    #[error("config: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain: {0}")]
    Domain(String),

    /// An iterative numerical procedure failed to reach its tolerance.
    #[error("numeric: {0}")]
    Numeric(String),

    /// Operators built over different bases were combined.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    /// Eigensolver failure or violated spectral contract.
    #[error("eigensolve: {0}")]
    Eigensolve(String),

    /// A level pair could not be followed unambiguously through a sweep.
    #[error("tracking: {0}")]
    Tracking(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for CLI use.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 64,
            _ => 1,
        }
    }
}
