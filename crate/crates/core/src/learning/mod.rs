//! Independent projected stochastic gradient ascent with direct tabular
//! policies.

mod psga;
mod simplex;

pub use psga::{
    psga_gradient_estimate, run_psga, InitialStateDistribution, IterationRecord, LearnerConfig,
    LearningTrace, PolicySnapshot,
};
pub use simplex::project_to_simplex;
