use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter outside the family domain: {0}")]
    DomainViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },
    #[error("unsupported scenario: {0}")]
    Unsupported(String),
    #[error("condition violated: {0}")]
    ConditionViolation(String),
    #[error("numerical domain error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
