use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible problem: {violations} node(s) violate lower <= upper or Dirichlet bounds")]
    Infeasible { violations: usize },

    #[error("partition failure: {0}")]
    PartitionFailure(String),

    #[error("matrix is not positive definite on the solved subspace (curvature {curvature:e})")]
    IndefiniteMatrix { curvature: f64 },

    #[error("iterative solve did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
