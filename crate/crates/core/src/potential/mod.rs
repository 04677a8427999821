//! One-shot potentials and the conditions that are claimed to turn a
//! one-shot potential stochastic game into a Markov potential game.

mod alignment;
mod conditions;
mod generate;

pub use alignment::{check_value_potential_alignment, AlignmentReport};
pub use conditions::{
    check_agent_independent_transitions, check_complete_state_transitivity, check_dummy_terms,
    check_state_transitivity, ConditionId, ConditionReport, CstSpotCheck, DummyTermProbe,
    SubCheck, Witness,
};
pub use generate::generate_cst_game;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::TabularStochasticGame;
use crate::{Error, Result};

/// Stage-game potential `phi[state][joint]`.
///
/// `verification_residual` is the largest violation of
/// `r_i(s,a) - r_i(s,a'_i,a_-i) = phi(s,a) - phi(s,a'_i,a_-i)` over all
/// agents, states, profiles and unilateral deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotPotential {
    state_count: usize,
    joint_count: usize,
    table: Vec<f64>,
    anchor: Vec<usize>,
    verification_residual: f64,
}

impl OneShotPotential {
    /// Wraps a flat `[state][joint]` table and measures its residual on
    /// `game`. The anchor is the all-zeros profile.
    pub fn from_table(game: &TabularStochasticGame, table: Vec<f64>) -> Result<Self> {
        let expected = game.state_count() * game.joint_count();
        if table.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "potential has {} entries, expected {expected}",
                table.len()
            )));
        }
        let residual = verification_residual(game, &table).0;
        Ok(OneShotPotential {
            state_count: game.state_count(),
            joint_count: game.joint_count(),
            table,
            anchor: vec![0; game.agent_count()],
            verification_residual: residual,
        })
    }

    /// Tabulates `phi(state, actions)` over decoded joint actions.
    pub fn from_fn<F>(game: &TabularStochasticGame, mut phi: F) -> Result<Self>
    where
        F: FnMut(usize, &[usize]) -> f64,
    {
        let space = game.joint_actions();
        let mut table = Vec::with_capacity(game.state_count() * space.size());
        for s in 0..game.state_count() {
            for j in 0..space.size() {
                table.push(phi(s, &space.decode(j)));
            }
        }
        Self::from_table(game, table)
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    #[inline]
    pub fn value(&self, state: usize, joint: usize) -> f64 {
        self.table[state * self.joint_count + joint]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.table[state * self.joint_count..(state + 1) * self.joint_count]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn anchor(&self) -> &[usize] {
        &self.anchor
    }

    pub fn verification_residual(&self) -> f64 {
        self.verification_residual
    }

    /// Copy with `offsets[s]` added to every entry of state `s`.
    pub fn shifted(&self, game: &TabularStochasticGame, offsets: &[f64]) -> Result<Self> {
        self.check_shape(game)?;
        if offsets.len() != self.state_count {
            return Err(Error::ShapeMismatch(format!(
                "{} offsets for {} states",
                offsets.len(),
                self.state_count
            )));
        }
        let table = self
            .table
            .chunks(self.joint_count)
            .zip(offsets)
            .flat_map(|(row, k)| row.iter().map(move |phi| phi + k))
            .collect();
        let mut out = Self::from_table(game, table)?;
        out.anchor = self.anchor.clone();
        Ok(out)
    }

    pub(crate) fn check_shape(&self, game: &TabularStochasticGame) -> Result<()> {
        if self.state_count == game.state_count() && self.joint_count == game.joint_count() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "potential is {}x{}, game is {}x{}",
                self.state_count,
                self.joint_count,
                game.state_count(),
                game.joint_count()
            )))
        }
    }
}

/// Four unilateral deviations `a -> b -> c -> d -> a` at one state, made
/// alternately by two agents, whose deviator payoff differences do not sum
/// to zero. Exact potentials exist only if every such sum vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationCycle {
    pub state: usize,
    /// Joint actions `a, b, c, d` in visiting order.
    pub profiles: [usize; 4],
    /// Agent making each step; `[i, j, i, j]`.
    pub deviators: [usize; 4],
    pub payoff_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("no one-shot potential: residual {residual:e} exceeds tolerance {tolerance:e}")]
pub struct NotPotential {
    pub residual: f64,
    pub tolerance: f64,
    pub cycle: Option<DeviationCycle>,
}

/// `d_i(s, a) = r_i(s, a) - phi(s, a)`, stored `[agent][state][joint]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTensor {
    state_count: usize,
    joint_count: usize,
    values: Vec<f64>,
}

impl ResidualTensor {
    #[inline]
    pub fn get(&self, agent: usize, state: usize, joint: usize) -> f64 {
        self.values[(agent * self.state_count + state) * self.joint_count + joint]
    }

    /// Agent `agent`'s residual as a flat `[state][joint]` table.
    pub fn agent_table(&self, agent: usize) -> &[f64] {
        let len = self.state_count * self.joint_count;
        &self.values[agent * len..(agent + 1) * len]
    }

    pub fn row(&self, agent: usize, state: usize) -> &[f64] {
        let start = (agent * self.state_count + state) * self.joint_count;
        &self.values[start..start + self.joint_count]
    }

    pub fn agent_count(&self) -> usize {
        self.values.len() / (self.state_count * self.joint_count).max(1)
    }
}

/// Largest violation of the one-shot potential identity, with the
/// `(agent, state, joint_a, joint_b)` pair attaining it.
///
/// For a fixed `(i, s, a_-i)` the identity says that `r_i - phi` is constant
/// along agent `i`'s own actions, so the residual is the largest spread of
/// `r_i - phi` along any own-action fibre.
pub(crate) fn verification_residual(
    game: &TabularStochasticGame,
    table: &[f64],
) -> (f64, Option<(usize, usize, usize, usize)>) {
    let space = game.joint_actions();
    let joints = space.size();
    let mut worst = 0.0;
    let mut witness = None;
    for agent in 0..game.agent_count() {
        let c = space.action_count(agent);
        for s in 0..game.state_count() {
            let r = game.payoff_row(agent, s);
            let phi = &table[s * joints..(s + 1) * joints];
            for base in (0..joints).filter(|&j| space.own_action(j, agent) == 0) {
                let (mut hi, mut lo) = ((f64::NEG_INFINITY, base), (f64::INFINITY, base));
                for x in 0..c {
                    let j = space.with_action(base, agent, x);
                    let d = r[j] - phi[j];
                    if d > hi.0 {
                        hi = (d, j);
                    }
                    if d < lo.0 {
                        lo = (d, j);
                    }
                }
                let spread = hi.0 - lo.0;
                if spread > worst {
                    worst = spread;
                    witness = Some((agent, s, hi.1, lo.1));
                }
            }
        }
    }
    (worst, witness)
}

/// Recovers a one-shot potential by summing unilateral payoff changes along
/// the path that moves agents 0, 1, .. in turn from the all-zeros anchor to
/// each profile, then verifies it exhaustively.
///
/// On success `phi(s, anchor) = 0` at every state. When verification fails
/// the error carries the worst four-step deviation cycle.
pub fn find_one_shot_potential(
    game: &TabularStochasticGame,
    tolerance: f64,
) -> Result<OneShotPotential, NotPotential> {
    let space = game.joint_actions();
    let joints = space.size();
    let n = game.agent_count();
    let mut table = Vec::with_capacity(game.state_count() * joints);
    for s in 0..game.state_count() {
        for j in 0..joints {
            let mut prefix = 0usize;
            let mut phi = 0.0;
            for agent in 0..n {
                let next = prefix + space.own_action(j, agent) * space.stride(agent);
                phi += game.payoff(agent, s, next) - game.payoff(agent, s, prefix);
                prefix = next;
            }
            table.push(phi);
        }
    }
    let (residual, _) = verification_residual(game, &table);
    if residual <= tolerance {
        Ok(OneShotPotential {
            state_count: game.state_count(),
            joint_count: joints,
            table,
            anchor: vec![0; n],
            verification_residual: residual,
        })
    } else {
        Err(NotPotential {
            residual,
            tolerance,
            cycle: worst_deviation_cycle(game),
        })
    }
}

/// Exhaustive search for the four-cycle with the largest absolute
/// deviator-payoff sum; ties keep the first cycle in index order.
pub fn worst_deviation_cycle(game: &TabularStochasticGame) -> Option<DeviationCycle> {
    let space = game.joint_actions();
    let n = game.agent_count();
    let mut best: Option<DeviationCycle> = None;
    for s in 0..game.state_count() {
        for i in 0..n {
            for k in (i + 1)..n {
                for a in 0..space.size() {
                    let (ai, ak) = (space.own_action(a, i), space.own_action(a, k));
                    for x in (0..space.action_count(i)).filter(|&x| x != ai) {
                        let b = space.with_action(a, i, x);
                        for y in (0..space.action_count(k)).filter(|&y| y != ak) {
                            let c = space.with_action(b, k, y);
                            let d = space.with_action(a, k, y);
                            let sum = (game.payoff(i, s, b) - game.payoff(i, s, a))
                                + (game.payoff(k, s, c) - game.payoff(k, s, b))
                                + (game.payoff(i, s, d) - game.payoff(i, s, c))
                                + (game.payoff(k, s, a) - game.payoff(k, s, d));
                            if best.as_ref().is_none_or(|cyc| sum.abs() > cyc.payoff_sum.abs()) {
                                best = Some(DeviationCycle {
                                    state: s,
                                    profiles: [a, b, c, d],
                                    deviators: [i, k, i, k],
                                    payoff_sum: sum,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

/// Shifts each state's potential by a constant so that agent 0's residual
/// `r_0 - phi` at the anchor profile is the same at every state, keeping
/// state 0 fixed. Stage-game identities are unaffected; the cross-state
/// conditions need the shift because a one-shot potential is only defined up
/// to a per-state constant.
pub fn calibrate_state_offsets(
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
) -> Result<OneShotPotential> {
    potential.check_shape(game)?;
    let anchor = game.joint_actions().encode(potential.anchor());
    let gap = |s: usize| game.payoff(0, s, anchor) - potential.value(s, anchor);
    let reference = gap(0);
    let offsets: Vec<f64> = (0..game.state_count())
        .map(|s| if s == 0 { 0.0 } else { gap(s) - reference })
        .collect();
    if offsets.iter().all(|&k| k == 0.0) {
        return Ok(potential.clone());
    }
    potential.shifted(game, &offsets)
}

pub fn residual_table(
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
) -> Result<ResidualTensor> {
    potential.check_shape(game)?;
    let mut values = Vec::with_capacity(game.agent_count() * potential.table.len());
    for agent in 0..game.agent_count() {
        for s in 0..game.state_count() {
            values.extend(
                game.payoff_row(agent, s)
                    .iter()
                    .zip(potential.row(s))
                    .map(|(r, phi)| r - phi),
            );
        }
    }
    Ok(ResidualTensor {
        state_count: game.state_count(),
        joint_count: game.joint_count(),
        values,
    })
}
