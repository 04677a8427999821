use serde::{Deserialize, Serialize};

use super::OneShotPotential;
use crate::game::{evaluate_policy, potential_value, JointPolicy, TabularStochasticGame};
use crate::{Error, Result};

/// Value change of a unilateral deviation against the change of the
/// potential's long-run value `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub agent: usize,
    pub start_state: usize,
    /// `V_i^pi(s) - V_i^pi'(s)`.
    pub delta_value: f64,
    /// `B^pi(s) - B^pi'(s)`.
    pub delta_potential: f64,
    pub misalignment: f64,
}

/// Compares `V_i^pi(s) - V_i^pi'(s)` with `B^pi(s) - B^pi'(s)` for a
/// deviation `pi'` that changes only `agent`'s table.
#[allow(clippy::too_many_arguments)]
pub fn check_value_potential_alignment(
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
    policy: &JointPolicy,
    agent: usize,
    deviation: &JointPolicy,
    start_state: usize,
    tolerance: f64,
) -> Result<AlignmentReport> {
    game.check_agent(agent)?;
    policy.check(game)?;
    deviation.check(game)?;
    if start_state >= game.state_count() {
        return Err(Error::ShapeMismatch(format!(
            "start state {start_state} out of range"
        )));
    }
    if let Some(other_agent) = (0..game.agent_count())
        .find(|&k| k != agent && policy.tables[k] != deviation.tables[k])
    {
        return Err(Error::NonUnilateral { other_agent });
    }
    let v = evaluate_policy(game, policy, agent, tolerance)?.values[start_state];
    let v_dev = evaluate_policy(game, deviation, agent, tolerance)?.values[start_state];
    let b = potential_value(game, potential, policy, tolerance)?.values[start_state];
    let b_dev = potential_value(game, potential, deviation, tolerance)?.values[start_state];
    let delta_value = v - v_dev;
    let delta_potential = b - b_dev;
    Ok(AlignmentReport {
        agent,
        start_state,
        delta_value,
        delta_potential,
        misalignment: (delta_value - delta_potential).abs(),
    })
}
