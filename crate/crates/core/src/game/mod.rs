//! Tabular stochastic games and their evaluation primitives.

mod evaluation;
mod joint;
mod kernel;
mod policy;
mod random;
mod trajectory;
mod validation;

pub use evaluation::{
    evaluate_policy, evaluate_reward, finite_horizon_value, horizon_for_epsilon, k_step_transition,
    potential_value, InducedChain, RewardSource, ValueFunction, ValueSource,
};
pub use joint::JointActionSpace;
pub use kernel::Kernel;
pub use policy::JointPolicy;
pub use random::random_game;
pub use trajectory::{sample_trajectory, Trajectory};
pub(crate) use evaluation::expectation;
pub(crate) use trajectory::{sample_index, sample_trajectory_with};
pub use validation::{validate_game, ValidationReport, Violation, ViolationKind};

use crate::{Error, Result};

/// An n-agent stochastic game over finite state and action sets.
///
/// Payoffs are stored as `payoffs[agent][state][joint]` flattened row-major;
/// the kernel rows are indexed by `(state, joint)` with joint actions encoded
/// by [`JointActionSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct TabularStochasticGame {
    actions: JointActionSpace,
    state_count: usize,
    payoffs: Vec<f64>,
    kernel: Kernel,
    discount: f64,
    state_labels: Option<Vec<f64>>,
}

impl TabularStochasticGame {
    /// Assembles a game without checking any invariant. Use
    /// [`validate_game`] (or [`TabularStochasticGame::new`]) before handing
    /// the result to a solver.
    pub fn from_parts(
        action_counts: Vec<usize>,
        state_count: usize,
        payoffs: Vec<f64>,
        kernel: Kernel,
        discount: f64,
        state_labels: Option<Vec<f64>>,
    ) -> Self {
        TabularStochasticGame {
            actions: JointActionSpace::new(action_counts),
            state_count,
            payoffs,
            kernel,
            discount,
            state_labels,
        }
    }

    /// Assembles and validates a game.
    pub fn new(
        action_counts: Vec<usize>,
        state_count: usize,
        payoffs: Vec<f64>,
        kernel: Kernel,
        discount: f64,
        state_labels: Option<Vec<f64>>,
    ) -> Result<Self> {
        let game = Self::from_parts(
            action_counts,
            state_count,
            payoffs,
            kernel,
            discount,
            state_labels,
        );
        let report = validate_game(&game);
        if report.is_valid() {
            Ok(game)
        } else {
            Err(Error::InvalidGame(report))
        }
    }

    /// Builds a validated game from closures over decoded joint actions.
    pub fn from_fn<P, T, I>(
        action_counts: Vec<usize>,
        state_count: usize,
        discount: f64,
        mut payoff: P,
        mut transition: T,
    ) -> Result<Self>
    where
        P: FnMut(usize, usize, &[usize]) -> f64,
        T: FnMut(usize, &[usize]) -> I,
        I: IntoIterator<Item = (usize, f64)>,
    {
        let space = JointActionSpace::new(action_counts.clone());
        let joints = space.size();
        let mut payoffs = Vec::with_capacity(action_counts.len() * state_count * joints);
        for agent in 0..action_counts.len() {
            for s in 0..state_count {
                for j in 0..joints {
                    payoffs.push(payoff(agent, s, &space.decode(j)));
                }
            }
        }
        let kernel = Kernel::from_fn(state_count, joints, |s, j| transition(s, &space.decode(j)));
        Self::new(action_counts, state_count, payoffs, kernel, discount, None)
    }

    pub fn with_state_labels(mut self, labels: Vec<f64>) -> Self {
        self.state_labels = Some(labels);
        self
    }

    pub fn agent_count(&self) -> usize {
        self.actions.agent_count()
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_counts(&self) -> &[usize] {
        self.actions.counts()
    }

    pub fn joint_actions(&self) -> &JointActionSpace {
        &self.actions
    }

    pub fn joint_count(&self) -> usize {
        self.actions.size()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn state_labels(&self) -> Option<&[f64]> {
        self.state_labels.as_deref()
    }

    pub(crate) fn raw_payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    #[inline]
    pub fn payoff(&self, agent: usize, state: usize, joint: usize) -> f64 {
        self.payoffs[(agent * self.state_count + state) * self.joint_count() + joint]
    }

    /// Agent `agent`'s payoff row at `state`, indexed by flat joint action.
    pub fn payoff_row(&self, agent: usize, state: usize) -> &[f64] {
        let j = self.joint_count();
        let start = (agent * self.state_count + state) * j;
        &self.payoffs[start..start + j]
    }

    /// Largest absolute payoff over all agents, states and joint actions.
    pub fn max_abs_payoff(&self) -> f64 {
        self.payoffs.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_abs_payoff_of(&self, agent: usize) -> f64 {
        (0..self.state_count)
            .flat_map(|s| self.payoff_row(agent, s).iter())
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    pub(crate) fn check_agent(&self, agent: usize) -> Result<()> {
        if agent < self.agent_count() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "agent {agent} out of range for a {}-agent game",
                self.agent_count()
            )))
        }
    }
}
