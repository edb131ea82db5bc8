use nalgebra::DVector;
use thiserror::Error;

use crate::barrier::SolverResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("sampling budget exceeded after accepting {} points", accepted.len())]
    SamplingBudgetExceeded { accepted: Vec<DVector<f64>> },

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("solver stopped at the iteration limit")]
    MaxIterations(Box<SolverResult>),

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),

    #[error("weighted combination of inverse shapes is singular")]
    SingularCombination,

    #[error("predicted spread has non-positive trace")]
    DegenerateTrace,

    #[error("predicted and measurement sets do not intersect")]
    EmptyIntersection,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

impl Error {
    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
