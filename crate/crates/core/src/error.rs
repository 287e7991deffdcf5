use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {left} vs {right} interior nodes per axis")]
    GridMismatch { left: usize, right: usize },

    #[error("field is not in the homogeneous Dirichlet space: {0}")]
    NotDirichlet(String),

    #[error(
        "regularity index kappa = 1/2 is excluded (the rate theory requires kappa > 0 and kappa != 1/2)"
    )]
    ExcludedKappa,

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolveFailed { iterations: usize, residual: f64 },

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("variational source condition violated at sample {sample}: excess {excess:.3e} with zero state difference")]
    VscViolation { sample: usize, excess: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
