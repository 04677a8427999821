use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{JointPolicy, TabularStochasticGame};
use crate::potential::OneShotPotential;
use crate::{tolerance, Error, Result};

/// What a [`ValueFunction`] was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSource {
    Agent(usize),
    Potential,
    /// An ad-hoc `[state][joint]` reward table, e.g. a dummy-term residual.
    Table,
    /// Optimal value of an [`crate::equilibrium::Mdp`].
    Mdp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub source: ValueSource,
}

impl ValueFunction {
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Per-step reward evaluated by the policy-evaluation routines.
#[derive(Debug, Clone, Copy)]
pub enum RewardSource<'a> {
    Agent(usize),
    Potential(&'a OneShotPotential),
    /// Flat `[state][joint]` table with the game's shape.
    Table(&'a [f64]),
}

impl RewardSource<'_> {
    fn tag(&self) -> ValueSource {
        match self {
            RewardSource::Agent(i) => ValueSource::Agent(*i),
            RewardSource::Potential(_) => ValueSource::Potential,
            RewardSource::Table(_) => ValueSource::Table,
        }
    }

    fn check(&self, game: &TabularStochasticGame) -> Result<()> {
        let expected = game.state_count() * game.joint_count();
        match self {
            RewardSource::Agent(i) => game.check_agent(*i),
            RewardSource::Potential(phi) => phi.check_shape(game),
            RewardSource::Table(t) if t.len() == expected => Ok(()),
            RewardSource::Table(t) => Err(Error::ShapeMismatch(format!(
                "reward table has {} entries, expected {expected}",
                t.len()
            ))),
        }
    }

    fn row<'g>(&'g self, game: &'g TabularStochasticGame, state: usize) -> &'g [f64] {
        let j = game.joint_count();
        match self {
            RewardSource::Agent(i) => game.payoff_row(*i, state),
            RewardSource::Potential(phi) => phi.row(state),
            RewardSource::Table(t) => &t[state * j..(state + 1) * j],
        }
    }
}

/// Markov chain over states induced by a joint policy.
#[derive(Debug, Clone)]
pub struct InducedChain {
    joint: Vec<Vec<f64>>,
    rows: Vec<Vec<(usize, f64)>>,
    discount: f64,
}

impl InducedChain {
    pub fn new(game: &TabularStochasticGame, policy: &JointPolicy) -> Result<Self> {
        policy.check_shape(game)?;
        let states = game.state_count();
        let space = game.joint_actions();
        let kernel = game.kernel();
        let mut joint = Vec::with_capacity(states);
        let mut rows = Vec::with_capacity(states);
        let mut dense = vec![0.0; states];
        for s in 0..states {
            let dist = policy.joint_distribution(space, s);
            for (j, &w) in dist.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for &(next, p) in kernel.row(s, j) {
                    dense[next] += w * p;
                }
            }
            rows.push(sparsify(&mut dense));
            joint.push(dist);
        }
        Ok(InducedChain {
            joint,
            rows,
            discount: game.discount(),
        })
    }

    /// Chain with explicit transition rows and no joint-action record.
    pub(crate) fn from_rows(rows: Vec<Vec<(usize, f64)>>, discount: f64) -> Self {
        InducedChain {
            joint: Vec::new(),
            rows,
            discount,
        }
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    /// Non-zero entries of the one-step transition row of `state`.
    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    /// Policy's joint-action distribution at `state`.
    pub fn joint_distribution(&self, state: usize) -> &[f64] {
        &self.joint[state]
    }

    pub fn dense_transition(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (s, row) in self.rows.iter().enumerate() {
            for &(next, p) in row {
                m[(s, next)] += p;
            }
        }
        m
    }

    /// `E_pi[reward(s, a)]` for every state.
    pub fn expected_reward(
        &self,
        game: &TabularStochasticGame,
        source: RewardSource<'_>,
    ) -> Result<Vec<f64>> {
        source.check(game)?;
        Ok((0..self.rows.len())
            .map(|s| expectation(&self.joint[s], source.row(game, s)))
            .collect())
    }

    /// `reward + discount * P * values`.
    pub fn backup(&self, reward: &[f64], values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(reward)
            .map(|(row, r)| r + self.discount * row.iter().map(|&(n, p)| p * values[n]).sum::<f64>())
            .collect()
    }

    /// Sup-norm of `backup(reward, values) - values`.
    pub fn bellman_residual(&self, reward: &[f64], values: &[f64]) -> f64 {
        self.backup(reward, values)
            .iter()
            .zip(values)
            .fold(0.0, |m, (b, v)| m.max((b - v).abs()))
    }

    /// Discounted value of `reward` along the chain with Bellman residual at
    /// most `tolerance`.
    pub fn solve(&self, reward: &[f64], tolerance: f64) -> Result<Vec<f64>> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        let mut values = if self.rows.len() <= tolerance::DIRECT_SOLVE_MAX_STATES {
            self.direct_solve(reward)?
        } else {
            vec![0.0; self.rows.len()]
        };
        // Polishes a direct solve that came back loose and is the whole
        // algorithm for large chains.
        let mut iterations = 0usize;
        const MAX_ITERATIONS: usize = 10_000_000;
        loop {
            let next = self.backup(reward, &values);
            let delta = next
                .iter()
                .zip(&values)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if delta <= tolerance {
                return Ok(values);
            }
            values = next;
            iterations += 1;
            if iterations >= MAX_ITERATIONS {
                return Err(Error::NonConvergence {
                    iterations,
                    last_delta: delta,
                });
            }
        }
    }

    fn direct_solve(&self, reward: &[f64]) -> Result<Vec<f64>> {
        let n = self.rows.len();
        let mut system = DMatrix::identity(n, n);
        for (s, row) in self.rows.iter().enumerate() {
            for &(next, p) in row {
                system[(s, next)] -= self.discount * p;
            }
        }
        let rhs = DVector::from_column_slice(reward);
        system
            .lu()
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::LinearSolve("singular policy-evaluation system".into()))
    }
}

fn sparsify(dense: &mut [f64]) -> Vec<(usize, f64)> {
    let mut row = Vec::new();
    for (next, p) in dense.iter_mut().enumerate() {
        if *p != 0.0 {
            row.push((next, *p));
            *p = 0.0;
        }
    }
    row
}

#[inline]
pub(crate) fn expectation(weights: &[f64], values: &[f64]) -> f64 {
    weights
        .iter()
        .zip(values)
        .filter(|(w, _)| **w != 0.0)
        .map(|(w, v)| w * v)
        .sum()
}

fn evaluate_source(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    source: RewardSource<'_>,
    tolerance: f64,
) -> Result<ValueFunction> {
    source.check(game)?;
    let chain = InducedChain::new(game, policy)?;
    let reward = chain.expected_reward(game, source)?;
    Ok(ValueFunction {
        values: chain.solve(&reward, tolerance)?,
        source: source.tag(),
    })
}

/// `V_i^pi`: agent `agent`'s discounted value of every state under `policy`,
/// with sup-norm Bellman residual at most `tolerance`.
pub fn evaluate_policy(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    agent: usize,
    tolerance: f64,
) -> Result<ValueFunction> {
    evaluate_source(game, policy, RewardSource::Agent(agent), tolerance)
}

/// `B^pi`: discounted sum of the one-shot potential along play.
pub fn potential_value(
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
    policy: &JointPolicy,
    tolerance: f64,
) -> Result<ValueFunction> {
    evaluate_source(game, policy, RewardSource::Potential(potential), tolerance)
}

/// Evaluates an arbitrary reward source with the same contract as
/// [`evaluate_policy`].
pub fn evaluate_reward(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    source: RewardSource<'_>,
    tolerance: f64,
) -> Result<ValueFunction> {
    evaluate_source(game, policy, source, tolerance)
}

/// `E_pi[sum_{t<T} gamma^t reward(s_t, a_t) | s_0 = s]` by exact backward
/// recursion. `horizon = 0` gives zeros.
pub fn finite_horizon_value(
    game: &TabularStochasticGame,
    source: RewardSource<'_>,
    policy: &JointPolicy,
    horizon: usize,
) -> Result<ValueFunction> {
    source.check(game)?;
    let chain = InducedChain::new(game, policy)?;
    let reward = chain.expected_reward(game, source)?;
    let mut values = vec![0.0; game.state_count()];
    for _ in 0..horizon {
        values = chain.backup(&reward, &values);
    }
    Ok(ValueFunction {
        values,
        source: source.tag(),
    })
}

/// `P^{k,pi}`: k-step state-to-state transition matrix; `k = 0` is the
/// identity.
pub fn k_step_transition(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    k: usize,
) -> Result<DMatrix<f64>> {
    let chain = InducedChain::new(game, policy)?;
    let one_step = chain.dense_transition();
    let n = game.state_count();
    let mut result = DMatrix::identity(n, n);
    for _ in 0..k {
        result = &one_step * result;
    }
    Ok(result)
}

/// Smallest horizon `T` with `T > |ln(eps (1 - gamma) / h_max) / ln gamma|`.
///
/// Any two truncated discounted sums of a reward bounded by `h_max`, both at
/// horizons of at least `T`, differ by less than `epsilon`. Returns 1 when
/// `eps (1 - gamma) / h_max >= 1` and 0 when `h_max = 0`.
pub fn horizon_for_epsilon(epsilon: f64, gamma: f64, h_max: f64) -> Result<usize> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(h_max >= 0.0) || !h_max.is_finite() {
        return Err(Error::InvalidArgument(format!("h_max must be non-negative, got {h_max}")));
    }
    if h_max == 0.0 {
        return Ok(0);
    }
    let ratio = epsilon * (1.0 - gamma) / h_max;
    if ratio >= 1.0 {
        return Ok(1);
    }
    let bound = (ratio.ln() / gamma.ln()).abs();
    Ok(bound.floor() as usize + 1)
}
