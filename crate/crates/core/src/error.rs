use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("incompatible Neumann datum: boundary mean {mean:e} exceeds tolerance {tol:e}")]
    Compatibility { mean: f64, tol: f64 },
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("basis mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: String, found: String },
    #[error("empty test family: {0}")]
    EmptyFamily(String),
    #[error("PCLC constraint violated: {0}")]
    Pclc(String),
    #[error("inconsistent data: {0}")]
    InconsistentData(String),
    #[error("value unbounded: predicate did not flip before |t| reached {cap:e}")]
    ValueUnbounded { cap: f64 },
    #[error("value out of range: positivity bound {bound:e} reached before the predicate flipped")]
    ValueOutOfRange { bound: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
