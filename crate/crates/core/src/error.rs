use thiserror::Error;

use crate::game::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid game: {0}")]
    InvalidGame(ValidationReport),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge after {iterations} iterations (last update {last_delta:e})")]
    NonConvergence { iterations: usize, last_delta: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("deviation is not unilateral: agent {other_agent} also changed its table")]
    NonUnilateral { other_agent: usize },

    #[error("trajectory visits action {action} at state {state} which has zero probability")]
    ZeroProbabilityAction { state: usize, action: usize },

    #[error("finite-difference step {fd_step:e} too large: probe policy entries must stay at least 2 steps inside the simplex (limit {limit:e})")]
    FdStepTooLarge { fd_step: f64, limit: f64 },

    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}
