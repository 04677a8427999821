use serde::{Deserialize, Serialize};

use super::mdp::{value_iteration, Mdp, DEFAULT_MAX_ITERATIONS};
use crate::game::{evaluate_policy, JointPolicy, Kernel, TabularStochasticGame};
use crate::potential::OneShotPotential;
use crate::{Error, Result};

/// Per agent, one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicJointPolicy {
    pub choices: Vec<Vec<usize>>,
}

impl DeterministicJointPolicy {
    pub fn new(game: &TabularStochasticGame, choices: Vec<Vec<usize>>) -> Result<Self> {
        let policy = DeterministicJointPolicy { choices };
        policy.check(game)?;
        Ok(policy)
    }

    pub fn check(&self, game: &TabularStochasticGame) -> Result<()> {
        if self.choices.len() != game.agent_count() {
            return Err(Error::ShapeMismatch(format!(
                "policy has {} agents, game has {}",
                self.choices.len(),
                game.agent_count()
            )));
        }
        for (agent, table) in self.choices.iter().enumerate() {
            if table.len() != game.state_count() {
                return Err(Error::ShapeMismatch(format!(
                    "agent {agent} has {} states, game has {}",
                    table.len(),
                    game.state_count()
                )));
            }
            if let Some((s, &a)) = table
                .iter()
                .enumerate()
                .find(|&(_, &a)| a >= game.action_counts()[agent])
            {
                return Err(Error::InvalidPolicy(format!(
                    "agent {agent} chooses action {a} at state {s}, only {} available",
                    game.action_counts()[agent]
                )));
            }
        }
        Ok(())
    }

    /// Flat joint decision per state.
    pub fn flatten(&self, game: &TabularStochasticGame) -> Vec<usize> {
        let space = game.joint_actions();
        (0..game.state_count())
            .map(|s| {
                let actions: Vec<usize> = self.choices.iter().map(|t| t[s]).collect();
                space.encode(&actions)
            })
            .collect()
    }

    pub fn to_joint_policy(&self, game: &TabularStochasticGame) -> JointPolicy {
        JointPolicy::deterministic(game, &self.choices)
    }
}

/// Un-flattens joint decisions into per-agent choice tables.
pub fn extract_joint_policy(
    decisions: &[usize],
    game: &TabularStochasticGame,
) -> Result<DeterministicJointPolicy> {
    if decisions.len() != game.state_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} decisions for {} states",
            decisions.len(),
            game.state_count()
        )));
    }
    if let Some(&d) = decisions.iter().find(|&&d| d >= game.joint_count()) {
        return Err(Error::OutOfRange {
            name: "joint decision",
            value: d as f64,
        });
    }
    let space = game.joint_actions();
    let choices = (0..game.agent_count())
        .map(|agent| decisions.iter().map(|&d| space.own_action(d, agent)).collect())
        .collect();
    Ok(DeterministicJointPolicy { choices })
}

/// MDP over flat joint actions with the potential as reward and the game's
/// kernel and discount.
pub fn build_dual_mdp(game: &TabularStochasticGame, potential: &OneShotPotential) -> Result<Mdp> {
    potential.check_shape(game)?;
    Mdp::new(
        game.state_count(),
        game.joint_count(),
        potential.table().to_vec(),
        game.kernel().clone(),
        game.discount(),
    )
}

/// Agent `agent`'s MDP against the fixed opponent part of `policy`.
pub fn best_response_mdp(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    agent: usize,
) -> Result<Mdp> {
    game.check_agent(agent)?;
    policy.check(game)?;
    let space = game.joint_actions();
    let own = space.action_count(agent);
    let n = game.state_count();
    let mut reward = vec![0.0; n * own];
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n * own);
    let mut dense = vec![0.0; n];
    for s in 0..n {
        let weights = policy.opponent_weights(space, s, agent);
        let payoffs = game.payoff_row(agent, s);
        let mut fibres: Vec<Vec<usize>> = vec![Vec::new(); own];
        for (j, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                fibres[space.own_action(j, agent)].push(j);
            }
        }
        for (a, fibre) in fibres.iter().enumerate() {
            let mut r = 0.0;
            let mut touched = Vec::new();
            for &j in fibre {
                let w = weights[j];
                r += w * payoffs[j];
                for &(next, p) in game.kernel().row(s, j) {
                    if dense[next] == 0.0 {
                        touched.push(next);
                    }
                    dense[next] += w * p;
                }
            }
            reward[s * own + a] = r;
            touched.sort_unstable();
            rows.push(touched.iter().map(|&t| (t, std::mem::take(&mut dense[t]))).collect());
        }
    }
    let kernel = Kernel::from_fn(n, own, |s, a| rows[s * own + a].clone());
    Mdp::new(n, own, reward, kernel, game.discount())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    pub epsilon: f64,
    pub solver_tolerance: f64,
    /// `max_s (V_i^BR(s) - V_i^pi(s))` per agent.
    pub per_agent_gap: Vec<f64>,
    pub per_agent_state_gaps: Vec<Vec<f64>>,
    pub policy_values: Vec<Vec<f64>>,
    pub best_response_values: Vec<Vec<f64>>,
    /// Greedy best-response action per agent and state.
    pub best_responses: Vec<Vec<usize>>,
    pub max_gap: f64,
    /// Agent and state attaining `max_gap`; the lowest indices among those
    /// within solver tolerance of it.
    pub witness_agent: usize,
    pub witness_state: usize,
    pub passed: bool,
}

struct AgentResult {
    policy_values: Vec<f64>,
    best_values: Vec<f64>,
    best_actions: Vec<usize>,
}

fn solve_agent(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    agent: usize,
    tolerance: f64,
) -> Result<AgentResult> {
    let mdp = best_response_mdp(game, policy, agent)?;
    let vi = value_iteration(&mdp, tolerance, DEFAULT_MAX_ITERATIONS)?;
    // Re-evaluating the greedy decisions with the same linear solver as the
    // current policy keeps both sides at the same accuracy. A few policy
    // improvement steps remove any greedy suboptimality left by value
    // iteration.
    let mut decisions = vi.decisions;
    let mut values = mdp.evaluate_decisions(&decisions, tolerance)?.values;
    for _ in 0..64 {
        let improved = mdp.greedy(&values);
        let better = (0..mdp.state_count()).any(|s| {
            improved[s] != decisions[s]
                && mdp.q_value(s, improved[s], &values)
                    > mdp.q_value(s, decisions[s], &values) + tolerance * 1e-3
        });
        if !better {
            break;
        }
        decisions = improved;
        values = mdp.evaluate_decisions(&decisions, tolerance)?.values;
    }
    let policy_values = evaluate_policy(game, policy, agent, tolerance)?.values;
    Ok(AgentResult {
        policy_values,
        best_values: values,
        best_actions: decisions,
    })
}

/// Checks the epsilon-Nash condition at every state for every agent.
pub fn verify_nash(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    epsilon: f64,
    tolerance: f64,
) -> Result<NashReport> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    policy.check(game)?;
    let results: Vec<Result<AgentResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..game.agent_count())
            .map(|agent| scope.spawn(move || solve_agent(game, policy, agent, tolerance)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("best-response solver panicked"))
            .collect()
    });
    let mut report = NashReport {
        epsilon,
        solver_tolerance: tolerance,
        per_agent_gap: Vec::new(),
        per_agent_state_gaps: Vec::new(),
        policy_values: Vec::new(),
        best_response_values: Vec::new(),
        best_responses: Vec::new(),
        max_gap: f64::NEG_INFINITY,
        witness_agent: 0,
        witness_state: 0,
        passed: false,
    };
    for result in results {
        let r = result?;
        let gaps: Vec<f64> = r
            .best_values
            .iter()
            .zip(&r.policy_values)
            .map(|(b, v)| b - v)
            .collect();
        report
            .per_agent_gap
            .push(gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        report.per_agent_state_gaps.push(gaps);
        report.policy_values.push(r.policy_values);
        report.best_response_values.push(r.best_values);
        report.best_responses.push(r.best_actions);
    }
    report.max_gap = report
        .per_agent_gap
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let near = |x: f64, top: f64| x >= top - tolerance;
    report.witness_agent = report
        .per_agent_gap
        .iter()
        .position(|&g| near(g, report.max_gap))
        .unwrap_or(0);
    if let Some(gaps) = report.per_agent_state_gaps.get(report.witness_agent) {
        let top = report.per_agent_gap[report.witness_agent];
        report.witness_state = gaps.iter().position(|&g| near(g, top)).unwrap_or(0);
    }
    report.passed = report.max_gap <= epsilon + tolerance;
    Ok(report)
}

/// `max_i max_s (V_i^BR(s) - V_i^pi(s))`.
pub fn nash_gap(game: &TabularStochasticGame, policy: &JointPolicy, tolerance: f64) -> Result<f64> {
    Ok(verify_nash(game, policy, 0.0, tolerance)?.max_gap)
}
