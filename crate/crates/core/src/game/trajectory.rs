use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{JointPolicy, TabularStochasticGame};
use crate::{Error, Result};

/// One sampled episode. `states` has one more entry than `joint_actions`;
/// `payoffs[agent][t] = r_agent(states[t], joint_actions[t])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub joint_actions: Vec<usize>,
    pub payoffs: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.joint_actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint_actions.is_empty()
    }
}

/// Samples `length` steps from `initial_state`, drawing each agent's action
/// from its own policy row and the next state from the kernel. The generator
/// is ChaCha8 seeded with `seed`, so equal seeds give equal trajectories.
pub fn sample_trajectory(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    initial_state: usize,
    length: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectory = sample_trajectory_with(game, policy, initial_state, length, &mut rng)?;
    trajectory.seed = seed;
    Ok(trajectory)
}

pub(crate) fn sample_trajectory_with<R: Rng>(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    initial_state: usize,
    length: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    policy.check_shape(game)?;
    if initial_state >= game.state_count() {
        return Err(Error::ShapeMismatch(format!(
            "initial state {initial_state} out of range for {} states",
            game.state_count()
        )));
    }
    let space = game.joint_actions();
    let n = game.agent_count();
    let mut states = Vec::with_capacity(length + 1);
    let mut joint_actions = Vec::with_capacity(length);
    let mut payoffs = vec![Vec::with_capacity(length); n];
    let mut actions = vec![0usize; n];
    let mut state = initial_state;
    states.push(state);
    for _ in 0..length {
        for (agent, a) in actions.iter_mut().enumerate() {
            *a = sample_index(policy.row(agent, state), rng.random::<f64>());
        }
        let joint = space.encode(&actions);
        for (agent, series) in payoffs.iter_mut().enumerate() {
            series.push(game.payoff(agent, state, joint));
        }
        joint_actions.push(joint);
        let row = game.kernel().row(state, joint);
        let u = rng.random::<f64>();
        let pick = sample_index_sparse(row, u);
        state = row[pick].0;
        states.push(state);
    }
    Ok(Trajectory {
        states,
        joint_actions,
        payoffs,
        seed: 0,
    })
}

/// Inverse-CDF draw from `weights` with a uniform `u in [0, 1)`. Zero-weight
/// entries are never returned.
pub(crate) fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = i;
        if target < acc {
            return i;
        }
    }
    last_positive
}

fn sample_index_sparse(row: &[(usize, f64)], u: f64) -> usize {
    let total: f64 = row.iter().map(|&(_, p)| p).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &(_, p)) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = i;
        if target < acc {
            return i;
        }
    }
    last_positive
}
