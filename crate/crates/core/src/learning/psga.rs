use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::project_to_simplex;
use crate::equilibrium::nash_gap;
use crate::game::{sample_index, sample_trajectory_with, JointPolicy, TabularStochasticGame, Trajectory};
use crate::{tolerance, Error, Result};

/// Where each batch trajectory starts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStateDistribution {
    #[default]
    Uniform,
    Fixed { state: usize },
    Weights { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    /// `T`; each batch has `T + 1` steps.
    pub batch_length: usize,
    pub iterations: usize,
    pub initial_state: InitialStateDistribution,
    pub seed: u64,
    /// Nash gap is logged after every `gap_check_every`-th update; 0 disables it.
    pub gap_check_every: usize,
    pub solver_tolerance: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            learning_rate: 0.01,
            batch_length: 8,
            iterations: 1000,
            initial_state: InitialStateDistribution::Uniform,
            seed: 0,
            gap_check_every: 0,
            solver_tolerance: tolerance::SOLVER,
        }
    }
}

impl LearnerConfig {
    fn check(&self, game: &TabularStochasticGame) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_length == 0 || self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "batch length and iterations must be at least 1".into(),
            ));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
        }
        match &self.initial_state {
            InitialStateDistribution::Uniform => {}
            InitialStateDistribution::Fixed { state } => {
                if *state >= game.state_count() {
                    return Err(Error::InvalidArgument(format!(
                        "initial state {state} out of range"
                    )));
                }
            }
            InitialStateDistribution::Weights { weights } => {
                let sum: f64 = weights.iter().sum();
                if weights.len() != game.state_count()
                    || weights.iter().any(|w| !(*w >= 0.0))
                    || (sum - 1.0).abs() > tolerance::STRUCTURAL
                {
                    return Err(Error::InvalidArgument(
                        "initial state weights must be a distribution over states".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn draw_initial<R: Rng>(&self, states: usize, rng: &mut R) -> usize {
        match &self.initial_state {
            InitialStateDistribution::Uniform => rng.random_range(0..states),
            InitialStateDistribution::Fixed { state } => *state,
            InitialStateDistribution::Weights { weights } => sample_index(weights, rng.random::<f64>()),
        }
    }
}

/// One update of the learning loop. `iteration` counts from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub initial_state: usize,
    /// `R_i`, the undiscounted sum of agent `i`'s payoffs over the batch.
    pub batch_returns: Vec<f64>,
    /// Average own action index over the batch, per agent.
    pub mean_actions: Vec<f64>,
    /// Nash gap of the policy after this update, when logged.
    pub nash_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub iteration: usize,
    pub policy: JointPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace {
    pub config: LearnerConfig,
    pub records: Vec<IterationRecord>,
    /// Policy after each logged update, plus the initial policy at iteration 0.
    pub snapshots: Vec<PolicySnapshot>,
    pub final_policy: JointPolicy,
}

impl LearningTrace {
    /// Logged gaps in iteration order.
    pub fn gaps(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.records
            .iter()
            .filter_map(|r| r.nash_gap.map(|g| (r.iteration, g)))
    }
}

/// Score-function estimate of agent `agent`'s policy gradient under direct
/// tabular parameterization: entry `(s, a)` is `R * n(s, a) / pi(a | s)`
/// where `n` counts visits in the trajectory and `R` sums the agent's
/// payoffs over every step.
pub fn psga_gradient_estimate(
    game: &TabularStochasticGame,
    trajectory: &Trajectory,
    policy: &JointPolicy,
    agent: usize,
) -> Result<Vec<Vec<f64>>> {
    game.check_agent(agent)?;
    policy.check_shape(game)?;
    if trajectory.payoffs.len() != game.agent_count()
        || trajectory.payoffs[agent].len() != trajectory.joint_actions.len()
        || trajectory.states.len() < trajectory.joint_actions.len()
    {
        return Err(Error::ShapeMismatch("trajectory does not match the game".into()));
    }
    let space = game.joint_actions();
    let total: f64 = trajectory.payoffs[agent].iter().sum();
    let mut grad = vec![vec![0.0; space.action_count(agent)]; game.state_count()];
    for (k, &joint) in trajectory.joint_actions.iter().enumerate() {
        let state = trajectory.states[k];
        if state >= game.state_count() || joint >= game.joint_count() {
            return Err(Error::ShapeMismatch(format!("trajectory step {k} out of range")));
        }
        let action = space.own_action(joint, agent);
        let p = policy.prob(agent, state, action);
        if !(p > 0.0) {
            return Err(Error::ZeroProbabilityAction { state, action });
        }
        grad[state][action] += total / p;
    }
    Ok(grad)
}

/// Runs independent PSGA from uniform policies. Every iteration samples one
/// trajectory of `batch_length + 1` steps that all agents share, then each
/// agent moves its own table along its gradient estimate and projects each
/// changed state row back onto the simplex.
pub fn run_psga(game: &TabularStochasticGame, config: &LearnerConfig) -> Result<LearningTrace> {
    config.check(game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = JointPolicy::uniform(game);
    let n = game.agent_count();
    let space = game.joint_actions();
    let mut records = Vec::with_capacity(config.iterations);
    let mut snapshots = vec![PolicySnapshot {
        iteration: 0,
        policy: policy.clone(),
    }];
    for iteration in 1..=config.iterations {
        let start = config.draw_initial(game.state_count(), &mut rng);
        let trajectory = sample_trajectory_with(game, &policy, start, config.batch_length + 1, &mut rng)?;
        let gradients = (0..n)
            .map(|agent| psga_gradient_estimate(game, &trajectory, &policy, agent))
            .collect::<Result<Vec<_>>>()?;
        let steps = trajectory.len() as f64;
        let batch_returns = trajectory.payoffs.iter().map(|p| p.iter().sum()).collect();
        let mean_actions = (0..n)
            .map(|agent| {
                trajectory
                    .joint_actions
                    .iter()
                    .map(|&j| space.own_action(j, agent) as f64)
                    .sum::<f64>()
                    / steps
            })
            .collect();
        for (agent, grad) in gradients.iter().enumerate() {
            for (s, g) in grad.iter().enumerate() {
                if g.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let row = &mut policy.tables[agent][s];
                let moved: Vec<f64> = row
                    .iter()
                    .zip(g)
                    .map(|(p, d)| p + config.learning_rate * d)
                    .collect();
                *row = project_to_simplex(&moved);
            }
        }
        let logged = config.gap_check_every > 0 && iteration % config.gap_check_every == 0;
        let gap = if logged {
            snapshots.push(PolicySnapshot {
                iteration,
                policy: policy.clone(),
            });
            Some(nash_gap(game, &policy, config.solver_tolerance)?)
        } else {
            None
        };
        records.push(IterationRecord {
            iteration,
            initial_state: start,
            batch_returns,
            mean_actions,
            nash_gap: gap,
        });
    }
    Ok(LearningTrace {
        config: config.clone(),
        records,
        snapshots,
        final_policy: policy,
    })
}
