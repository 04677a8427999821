use serde::{Deserialize, Serialize};

use rand::Rng;

use super::{JointActionSpace, TabularStochasticGame};
use crate::{tolerance, Error, Result};

/// Product stationary policy: `tables[agent][state][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolicy {
    pub tables: Vec<Vec<Vec<f64>>>,
}

impl JointPolicy {
    pub fn new(tables: Vec<Vec<Vec<f64>>>) -> Self {
        JointPolicy { tables }
    }

    pub fn uniform(game: &TabularStochasticGame) -> Self {
        let tables = game
            .action_counts()
            .iter()
            .map(|&c| vec![vec![1.0 / c as f64; c]; game.state_count()])
            .collect();
        JointPolicy { tables }
    }

    /// Unit-row policy from per-agent action choices `choices[agent][state]`.
    pub fn deterministic(game: &TabularStochasticGame, choices: &[Vec<usize>]) -> Self {
        let tables = choices
            .iter()
            .zip(game.action_counts())
            .map(|(per_state, &c)| {
                per_state
                    .iter()
                    .map(|&a| {
                        let mut row = vec![0.0; c];
                        row[a] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        JointPolicy { tables }
    }

    /// Product policy whose rows are normalised uniform draws.
    pub fn random<R: Rng>(game: &TabularStochasticGame, rng: &mut R) -> Self {
        let tables = game
            .action_counts()
            .iter()
            .map(|&c| {
                (0..game.state_count())
                    .map(|_| {
                        let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-12).collect();
                        let total: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / total).collect()
                    })
                    .collect()
            })
            .collect();
        JointPolicy { tables }
    }

    /// `(1 - weight) * self + weight * other`, row by row.
    pub fn mix(&self, other: &JointPolicy, weight: f64) -> Self {
        let tables = self
            .tables
            .iter()
            .zip(&other.tables)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(ra, rb)| {
                        ra.iter()
                            .zip(rb)
                            .map(|(x, y)| (1.0 - weight) * x + weight * y)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        JointPolicy { tables }
    }

    /// Smallest entry over every table.
    pub fn min_entry(&self) -> f64 {
        self.tables
            .iter()
            .flatten()
            .flatten()
            .fold(f64::INFINITY, |m, &p| m.min(p))
    }

    pub fn agent_count(&self) -> usize {
        self.tables.len()
    }

    #[inline]
    pub fn prob(&self, agent: usize, state: usize, action: usize) -> f64 {
        self.tables[agent][state][action]
    }

    pub fn row(&self, agent: usize, state: usize) -> &[f64] {
        &self.tables[agent][state]
    }

    /// Copy of this policy with `agent`'s table replaced.
    pub fn with_agent_table(&self, agent: usize, table: Vec<Vec<f64>>) -> Self {
        let mut out = self.clone();
        out.tables[agent] = table;
        out
    }

    /// Checks table shapes against the game and the simplex constraint on
    /// every row.
    pub fn check(&self, game: &TabularStochasticGame) -> Result<()> {
        self.check_shape(game)?;
        for (agent, table) in self.tables.iter().enumerate() {
            for (s, row) in table.iter().enumerate() {
                let mut sum = 0.0;
                for &p in row {
                    if !(p >= 0.0) || !p.is_finite() {
                        return Err(Error::InvalidPolicy(format!(
                            "agent {agent}, state {s}: entry {p} is not a probability"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > tolerance::STRUCTURAL {
                    return Err(Error::InvalidPolicy(format!(
                        "agent {agent}, state {s}: row sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_shape(&self, game: &TabularStochasticGame) -> Result<()> {
        if self.tables.len() != game.agent_count() {
            return Err(Error::ShapeMismatch(format!(
                "policy has {} agent tables, game has {} agents",
                self.tables.len(),
                game.agent_count()
            )));
        }
        for (agent, table) in self.tables.iter().enumerate() {
            if table.len() != game.state_count() {
                return Err(Error::ShapeMismatch(format!(
                    "agent {agent}'s policy covers {} states, game has {}",
                    table.len(),
                    game.state_count()
                )));
            }
            let c = game.action_counts()[agent];
            if let Some(s) = table.iter().position(|row| row.len() != c) {
                return Err(Error::ShapeMismatch(format!(
                    "agent {agent}'s policy row at state {s} has {} entries, expected {c}",
                    table[s].len()
                )));
            }
        }
        Ok(())
    }

    /// Product distribution over flat joint actions at `state`.
    pub fn joint_distribution(&self, space: &JointActionSpace, state: usize) -> Vec<f64> {
        self.product(space, state, None)
    }

    /// Product of every agent's probability except `agent`'s, per flat joint
    /// action at `state`. Summing over `agent`'s own action fibre gives 1.
    pub fn opponent_weights(&self, space: &JointActionSpace, state: usize, agent: usize) -> Vec<f64> {
        self.product(space, state, Some(agent))
    }

    fn product(&self, space: &JointActionSpace, state: usize, skip: Option<usize>) -> Vec<f64> {
        // Build from the slowest agent inward so the layout matches the
        // mixed-radix law.
        let mut dist = vec![1.0];
        for agent in (0..space.agent_count()).rev() {
            let c = space.action_count(agent);
            let mut next = Vec::with_capacity(dist.len() * c);
            for &w in &dist {
                if Some(agent) == skip {
                    next.extend(std::iter::repeat_n(w, c));
                } else {
                    next.extend(self.tables[agent][state].iter().map(|&p| w * p));
                }
            }
            dist = next;
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_distribution_follows_the_index_law() {
        let space = JointActionSpace::new(vec![2, 3]);
        let policy = JointPolicy::new(vec![
            vec![vec![0.25, 0.75]],
            vec![vec![0.5, 0.3, 0.2]],
        ]);
        let dist = policy.joint_distribution(&space, 0);
        for (j, p) in dist.iter().enumerate() {
            let a = space.decode(j);
            let expected = policy.prob(0, 0, a[0]) * policy.prob(1, 0, a[1]);
            assert!((p - expected).abs() < 1e-15);
        }
        let w = policy.opponent_weights(&space, 0, 0);
        assert_eq!(w[space.encode(&[1, 2])], 0.2);
        assert_eq!(w[space.encode(&[0, 2])], 0.2);
    }
}
