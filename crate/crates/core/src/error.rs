use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("not a state: {0}")]
    NotState(String),
    #[error("not a stochastic operator matrix: {0}")]
    NotStochastic(String),
    #[error("not a quantum channel: {0}")]
    NotChannel(String),
    #[error("operator blocks do not commute (max commutator norm {0:.3e})")]
    NonCommuting(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("undefined composition: {0}")]
    UndefinedComposition(String),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
