//! Dual and best-response MDPs, value iteration and ε-Nash verification.

mod mdp;
mod nash;

pub use mdp::{value_iteration, Mdp, MdpSolution, DEFAULT_MAX_ITERATIONS};
pub use nash::{
    best_response_mdp, build_dual_mdp, extract_joint_policy, nash_gap, verify_nash,
    DeterministicJointPolicy, NashReport,
};
