//! Dense interior-point solver for small LMI-constrained problems.

mod map;
mod problem;
mod solver;

pub use map::AffineSymMap;
pub(crate) use map::BlockBuilder;
pub use problem::{LmiConstraint, LmiProblem, Objective, Sense};
pub use solver::{
    objective_value, phase1, solve, sym_block, SolverDiagnostics, SolverOptions, SolverResult,
    SolverStatus, PHASE1_MARGIN,
};
