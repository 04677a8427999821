use serde::{Deserialize, Serialize};

use crate::game::{InducedChain, Kernel, ValueFunction, ValueSource};
use crate::{tolerance, Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Single decision-maker MDP over flat decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    state_count: usize,
    decision_count: usize,
    reward: Vec<f64>,
    kernel: Kernel,
    discount: f64,
}

impl Mdp {
    /// `reward` is flat `[state][decision]`.
    pub fn new(
        state_count: usize,
        decision_count: usize,
        reward: Vec<f64>,
        kernel: Kernel,
        discount: f64,
    ) -> Result<Self> {
        if reward.len() != state_count * decision_count {
            return Err(Error::ShapeMismatch(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                state_count * decision_count
            )));
        }
        if kernel.state_count() != state_count || kernel.decisions() != decision_count {
            return Err(Error::ShapeMismatch("kernel shape does not match the MDP".into()));
        }
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument(format!("reward {r} is not finite")));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidArgument(format!("discount {discount} not in (0, 1)")));
        }
        for s in 0..state_count {
            for d in 0..decision_count {
                let row = kernel.row(s, d);
                let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > tolerance::STRUCTURAL
                    || row
                        .iter()
                        .any(|&(n, p)| n >= state_count || !(0.0..=1.0 + tolerance::STRUCTURAL).contains(&p))
                {
                    return Err(Error::InvalidArgument(format!(
                        "transition row ({s}, {d}) is not a distribution"
                    )));
                }
            }
        }
        Ok(Mdp {
            state_count,
            decision_count,
            reward,
            kernel,
            discount,
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn decision_count(&self) -> usize {
        self.decision_count
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    #[inline]
    pub fn reward(&self, state: usize, decision: usize) -> f64 {
        self.reward[state * self.decision_count + decision]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// One-step lookahead `r(s, d) + gamma * E[V(s')]`.
    #[inline]
    pub fn q_value(&self, state: usize, decision: usize, values: &[f64]) -> f64 {
        self.reward(state, decision)
            + self.discount
                * self
                    .kernel
                    .row(state, decision)
                    .iter()
                    .map(|&(n, p)| p * values[n])
                    .sum::<f64>()
    }

    /// Greedy decision per state; ties go to the lowest decision index.
    pub fn greedy(&self, values: &[f64]) -> Vec<usize> {
        (0..self.state_count)
            .map(|s| self.best_decision(s, values).0)
            .collect()
    }

    fn best_decision(&self, state: usize, values: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for d in 0..self.decision_count {
            let q = self.q_value(state, d, values);
            if q > best.1 {
                best = (d, q);
            }
        }
        best
    }

    /// Sup-norm of `T*V - V` for the Bellman optimality operator.
    pub fn optimality_residual(&self, values: &[f64]) -> f64 {
        (0..self.state_count)
            .map(|s| (self.best_decision(s, values).1 - values[s]).abs())
            .fold(0.0, f64::max)
    }

    /// Value of a stationary deterministic decision table.
    pub fn evaluate_decisions(&self, decisions: &[usize], tolerance: f64) -> Result<ValueFunction> {
        if decisions.len() != self.state_count || decisions.iter().any(|&d| d >= self.decision_count) {
            return Err(Error::ShapeMismatch("decision table does not fit the MDP".into()));
        }
        let rows = decisions
            .iter()
            .enumerate()
            .map(|(s, &d)| self.kernel.row(s, d).to_vec())
            .collect();
        let reward: Vec<f64> = decisions.iter().enumerate().map(|(s, &d)| self.reward(s, d)).collect();
        let chain = InducedChain::from_rows(rows, self.discount);
        Ok(ValueFunction {
            values: chain.solve(&reward, tolerance)?,
            source: ValueSource::Mdp,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSolution {
    pub value: ValueFunction,
    /// Greedy decision per state.
    pub decisions: Vec<usize>,
    pub iterations: usize,
    /// States where some other decision's lookahead is within tolerance of
    /// the greedy one.
    pub tied_states: Vec<usize>,
}

/// Value iteration from zero. Stops once successive iterates differ by less
/// than `tolerance * (1 - gamma) / (2 * gamma)`, which puts the returned
/// values within `tolerance / 2` of optimal and their Bellman residual below
/// `tolerance`.
pub fn value_iteration(mdp: &Mdp, tolerance: f64, max_iterations: usize) -> Result<MdpSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let gamma = mdp.discount;
    let threshold = tolerance * (1.0 - gamma) / (2.0 * gamma);
    let mut values = vec![0.0; mdp.state_count];
    let mut next = vec![0.0; mdp.state_count];
    let mut iterations = 0;
    loop {
        let mut delta: f64 = 0.0;
        for (s, v) in next.iter_mut().enumerate() {
            *v = mdp.best_decision(s, &values).1;
            delta = delta.max((*v - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        iterations += 1;
        if delta < threshold {
            break;
        }
        if iterations >= max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                last_delta: delta,
            });
        }
    }
    let decisions = mdp.greedy(&values);
    let tied_states = (0..mdp.state_count)
        .filter(|&s| {
            let best = mdp.q_value(s, decisions[s], &values);
            (0..mdp.decision_count)
                .any(|d| d != decisions[s] && mdp.q_value(s, d, &values) >= best - tolerance)
        })
        .collect();
    Ok(MdpSolution {
        value: ValueFunction {
            values,
            source: ValueSource::Mdp,
        },
        decisions,
        iterations,
        tied_states,
    })
}
