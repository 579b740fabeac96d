use thiserror::Error;

/// Errors raised by the thermodynamic, algebraic and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A density or other argument left the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input failed structural validation (asymmetric friction, bad shapes, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// A matrix that must be regular turned out singular.
    #[error("structural error: {0}")]
    Structural(String),
    /// An operation was called with inputs violating its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Time integration could not proceed.
    #[error("solver failure at t = {t}: {reason}")]
    SolverFailure { t: f64, reason: String },
    /// Two fields or states live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// Configuration could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
