//! Default numerical tolerances. Every operation that uses one also accepts
//! an explicit value.

/// Row-sum and simplex-membership tolerance for kernels and policies.
pub const STRUCTURAL: f64 = 1e-12;

/// Bellman residual / value accuracy for the solvers.
pub const SOLVER: f64 = 1e-10;

/// Absolute tolerance for the condition checkers.
pub const CHECKER: f64 = 1e-9;

/// Central finite-difference step for the dummy-term gradient probe.
pub const FD_STEP: f64 = 1e-4;

/// Largest state count solved by a direct linear solve during policy
/// evaluation; larger chains use iterative evaluation.
pub const DIRECT_SOLVE_MAX_STATES: usize = 512;
