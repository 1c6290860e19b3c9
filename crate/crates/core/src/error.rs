use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("monotone iteration broke monotonicity at step {iteration}, node {node} (excess {excess:e})")]
    MonotonicityViolation {
        iteration: usize,
        node: usize,
        excess: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("not a valid witness: inequality fails at node {node} by {excess:e}")]
    InvalidWitness { node: usize, excess: f64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("nonlinearity violates {}", format_violations(.0))]
    Hypothesis(Vec<crate::nonlinearity::Violation>),

    #[error("degenerate profile: {0}")]
    Degenerate(String),
}

fn format_violations(v: &[crate::nonlinearity::Violation]) -> String {
    v.iter()
        .map(|x| format!("{} at t = {:.6}", x.assumption, x.t))
        .collect::<Vec<_>>()
        .join(", ")
}
