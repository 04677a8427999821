use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{residual_table, verification_residual, OneShotPotential, ResidualTensor};
use crate::game::{expectation, InducedChain, JointPolicy, RewardSource, TabularStochasticGame};
use crate::{tolerance, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionId {
    /// Transitions do not depend on the joint action.
    #[serde(rename = "C1_agent_independent")]
    AgentIndependent,
    /// Residuals ignore the agent's own action and contribute a
    /// policy-flat long-run term.
    #[serde(rename = "C2_dummy_terms")]
    DummyTerms,
    /// Cross-state payoff differences equal cross-state potential differences.
    #[serde(rename = "C3_state_transitivity")]
    StateTransitivity,
    /// Expected residual under any policy is state-independent.
    #[serde(rename = "CST_complete")]
    CompleteStateTransitivity,
}

/// Index tuple attaining a checker's maximum residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Transition { state: usize, joint_a: usize, joint_b: usize, next_state: usize },
    OwnActionFibre { agent: usize, state: usize, joint_a: usize, joint_b: usize },
    Gradient { agent: usize, state: usize, action_a: usize, action_b: usize, probe: usize },
    StatePair { agent: usize, state_a: usize, state_b: usize, joint: usize },
    Profiles { agent: usize, state_a: usize, joint_a: usize, state_b: usize, joint_b: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub passed: bool,
    pub max_residual: f64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub passed: bool,
    /// The condition holds because there is nothing to compare.
    pub vacuous: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    pub sub_checks: Vec<SubCheck>,
}

impl ConditionReport {
    fn plain(condition: ConditionId, max_residual: f64, tolerance: f64, witness: Option<Witness>) -> Self {
        ConditionReport {
            condition,
            passed: max_residual <= tolerance,
            vacuous: false,
            max_residual,
            tolerance,
            witness,
            sub_checks: Vec::new(),
        }
    }
}

fn better(candidate: f64, current: f64) -> bool {
    candidate > current
}

/// Largest `|p(s'|s,a) - p(s'|s,b)|` over states, joint-action pairs and
/// next states.
pub fn check_agent_independent_transitions(
    game: &TabularStochasticGame,
    tolerance: f64,
) -> ConditionReport {
    let states = game.state_count();
    let joints = game.joint_count();
    let kernel = game.kernel();
    let mut worst = 0.0;
    let mut at: Option<(usize, usize)> = None;
    let mut hi = vec![f64::NEG_INFINITY; states];
    let mut lo = vec![f64::INFINITY; states];
    let mut count = vec![0usize; states];
    for s in 0..states {
        hi.fill(f64::NEG_INFINITY);
        lo.fill(f64::INFINITY);
        count.fill(0);
        for j in 0..joints {
            for &(next, p) in kernel.row(s, j) {
                count[next] += 1;
                hi[next] = hi[next].max(p);
                lo[next] = lo[next].min(p);
            }
        }
        for next in 0..states {
            if count[next] == 0 {
                continue;
            }
            let (mut h, mut l) = (hi[next], lo[next]);
            if count[next] < joints {
                h = h.max(0.0);
                l = l.min(0.0);
            }
            if better(h - l, worst) {
                worst = h - l;
                at = Some((s, next));
            }
        }
    }
    let witness = at.map(|(s, next)| {
        let column: Vec<f64> = (0..joints).map(|j| kernel.probability(s, j, next)).collect();
        let (mut a, mut b) = (0, 0);
        for (j, &p) in column.iter().enumerate() {
            if p > column[a] {
                a = j;
            }
            if p < column[b] {
                b = j;
            }
        }
        Witness::Transition {
            state: s,
            joint_a: a,
            joint_b: b,
            next_state: next,
        }
    });
    let mut report = ConditionReport::plain(ConditionId::AgentIndependent, worst, tolerance, witness);
    report.vacuous = joints == 1;
    report
}

/// Where the dummy-term gradient is probed.
///
/// The gradient condition is a statement about every policy, so a single
/// probe point can miss a violation: at the uniform joint policy of a game
/// whose residual depends only on opponents' actions, every state has the
/// same expected residual and all directional derivatives vanish. The probe
/// therefore covers the uniform policy plus `random_policies` seeded interior
/// policies, each `(1 - mix) * uniform + mix * random`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyTermProbe {
    pub fd_step: f64,
    pub random_policies: usize,
    pub mix: f64,
    pub seed: u64,
}

impl Default for DummyTermProbe {
    fn default() -> Self {
        DummyTermProbe {
            fd_step: tolerance::FD_STEP,
            random_policies: 3,
            mix: 0.5,
            seed: 0,
        }
    }
}

impl DummyTermProbe {
    /// Only the uniform joint policy.
    pub fn uniform_only(fd_step: f64) -> Self {
        DummyTermProbe {
            fd_step,
            random_policies: 0,
            ..Default::default()
        }
    }

    pub fn policies(&self, game: &TabularStochasticGame) -> Vec<JointPolicy> {
        let uniform = JointPolicy::uniform(game);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = vec![uniform.clone()];
        for _ in 0..self.random_policies {
            out.push(uniform.mix(&JointPolicy::random(game, &mut rng), self.mix));
        }
        out
    }
}

/// Condition 2: (a) every residual `d_i = r_i - phi` is independent of agent
/// `i`'s own action, and (b) the long-run residual value
/// `U_i(s) = E[sum_t gamma^t d_i(s_t, a_t) | s_0 = s]` has equal partial
/// derivatives in every entry of `pi_i(.|s)`, i.e. central differences along
/// each simplex tangent `e_a - e_b` vanish.
pub fn check_dummy_terms(
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
    probe: &DummyTermProbe,
    tolerance: f64,
) -> Result<ConditionReport> {
    let d = residual_table(game, potential)?;
    let h = probe.fd_step;
    let probes = probe.policies(game);
    for policy in &probes {
        let limit = policy.min_entry() / 3.0;
        if !(h > 0.0) || h > limit {
            return Err(Error::FdStepTooLarge { fd_step: h, limit });
        }
    }

    let (structural, fibre) = verification_residual(game, potential.table());
    let structural_witness = fibre.map(|(agent, state, joint_a, joint_b)| Witness::OwnActionFibre {
        agent,
        state,
        joint_a,
        joint_b,
    });

    let mut gradient = 0.0;
    let mut gradient_witness = None;
    for (index, policy) in probes.iter().enumerate() {
        let probe = GradientProbe::new(game, policy)?;
        for agent in 0..game.agent_count() {
            let fn_values = probe.values(game, &d, agent)?;
            for s in 0..game.state_count() {
                let derivatives = probe.directional_derivatives(game, policy, &d, &fn_values, agent, s, h);
                let (mut hi, mut lo) = ((0.0, 0usize), (0.0, 0usize));
                for (a, &g) in derivatives.iter().enumerate() {
                    if g > hi.0 {
                        hi = (g, a);
                    }
                    if g < lo.0 {
                        lo = (g, a);
                    }
                }
                if better(hi.0 - lo.0, gradient) {
                    gradient = hi.0 - lo.0;
                    gradient_witness = Some(Witness::Gradient {
                        agent,
                        state: s,
                        action_a: hi.1,
                        action_b: lo.1,
                        probe: index,
                    });
                }
            }
        }
    }

    let sub_checks = vec![
        SubCheck {
            name: "own_action_independence".into(),
            passed: structural <= tolerance,
            max_residual: structural,
            witness: structural_witness.clone(),
        },
        SubCheck {
            name: "gradient_flatness".into(),
            passed: gradient <= tolerance,
            max_residual: gradient,
            witness: gradient_witness.clone(),
        },
    ];
    let (max_residual, witness) = if gradient > structural {
        (gradient, gradient_witness)
    } else {
        (structural, structural_witness)
    };
    Ok(ConditionReport {
        condition: ConditionId::DummyTerms,
        passed: sub_checks.iter().all(|c| c.passed),
        vacuous: false,
        max_residual,
        tolerance,
        witness,
        sub_checks,
    })
}

/// Finite-difference machinery for one base policy.
///
/// Perturbing `pi_i(.|s)` changes only row `s` of the induced chain and
/// entry `s` of the expected reward, so each perturbed value is a rank-one
/// (Sherman-Morrison) update of the base solve instead of a fresh one.
struct GradientProbe {
    inverse: DMatrix<f64>,
    chain: InducedChain,
    discount: f64,
}

impl GradientProbe {
    fn new(game: &TabularStochasticGame, policy: &JointPolicy) -> Result<Self> {
        let chain = InducedChain::new(game, policy)?;
        let n = game.state_count();
        let system = DMatrix::identity(n, n) - chain.dense_transition() * game.discount();
        let inverse = system
            .try_inverse()
            .ok_or_else(|| Error::LinearSolve("singular evaluation system".into()))?;
        Ok(GradientProbe {
            inverse,
            chain,
            discount: game.discount(),
        })
    }

    fn values(&self, game: &TabularStochasticGame, d: &ResidualTensor, agent: usize) -> Result<Vec<f64>> {
        let reward = self
            .chain
            .expected_reward(game, RewardSource::Table(d.agent_table(agent)))?;
        Ok((0..reward.len())
            .map(|s| (0..reward.len()).map(|k| self.inverse[(s, k)] * reward[k]).sum())
            .collect())
    }

    /// Central-difference derivative of `U_agent(s)` along `e_a - e_0` of
    /// `pi_agent(.|s)` for every own action `a` (entry 0 is 0).
    #[allow(clippy::too_many_arguments)]
    fn directional_derivatives(
        &self,
        game: &TabularStochasticGame,
        policy: &JointPolicy,
        d: &ResidualTensor,
        values: &[f64],
        agent: usize,
        s: usize,
        h: f64,
    ) -> Vec<f64> {
        let space = game.joint_actions();
        let states = game.state_count();
        let actions = space.action_count(agent);
        let weights = policy.opponent_weights(space, s, agent);
        // Conditional next-state rows and expected residuals per own action.
        let mut next = vec![vec![0.0; states]; actions];
        let mut reward = vec![0.0; actions];
        let residual = d.row(agent, s);
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let x = space.own_action(j, agent);
            reward[x] += w * residual[j];
            for &(n, p) in game.kernel().row(s, j) {
                next[x][n] += w * p;
            }
        }
        let column: Vec<f64> = (0..states).map(|k| self.inverse[(k, s)]).collect();
        let gamma = self.discount;
        let mut out = vec![0.0; actions];
        for a in 1..actions {
            let dp: Vec<f64> = next[a].iter().zip(&next[0]).map(|(x, y)| h * (x - y)).collect();
            let dr = h * (reward[a] - reward[0]);
            let dp_u: f64 = dp.iter().zip(values).map(|(p, v)| p * v).sum();
            let dp_c: f64 = dp.iter().zip(&column).map(|(p, c)| p * c).sum();
            let perturbed = |sign: f64| {
                let x_s = values[s] + sign * dr * column[s];
                let v_dot_x = sign * (dp_u + sign * dr * dp_c);
                let v_dot_y = sign * gamma * dp_c;
                x_s + gamma * column[s] * v_dot_x / (1.0 - v_dot_y)
            };
            out[a] = (perturbed(1.0) - perturbed(-1.0)) / (2.0 * h);
        }
        out
    }
}

/// Condition 3 on a calibrated potential: for every agent and joint action,
/// `d_i(., a)` is the same at every state.
pub fn check_state_transitivity(
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
    tolerance: f64,
) -> Result<ConditionReport> {
    let d = residual_table(game, potential)?;
    let mut worst = 0.0;
    let mut witness = None;
    for agent in 0..game.agent_count() {
        for j in 0..game.joint_count() {
            let (mut hi, mut lo) = ((f64::NEG_INFINITY, 0), (f64::INFINITY, 0));
            for s in 0..game.state_count() {
                let v = d.get(agent, s, j);
                if v > hi.0 {
                    hi = (v, s);
                }
                if v < lo.0 {
                    lo = (v, s);
                }
            }
            if better(hi.0 - lo.0, worst) {
                worst = hi.0 - lo.0;
                witness = Some(Witness::StatePair {
                    agent,
                    state_a: hi.1,
                    state_b: lo.1,
                    joint: j,
                });
            }
        }
    }
    Ok(ConditionReport::plain(
        ConditionId::StateTransitivity,
        worst,
        tolerance,
        witness,
    ))
}

/// Seeded stochastic policies used to cross-check the deterministic verdict
/// of complete state transitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CstSpotCheck {
    pub policies: usize,
    pub seed: u64,
}

impl Default for CstSpotCheck {
    fn default() -> Self {
        CstSpotCheck {
            policies: 100,
            seed: 0,
        }
    }
}

/// Complete state transitivity on a calibrated potential.
///
/// Over product deterministic policies the condition reads
/// `d_i(s, a) = d_i(s', b)` for all `s != s'` and all `a, b`, so the residual
/// is `max_{s != s'} (max_a d_i(s, a) - min_b d_i(s', b))`. The expectation
/// form is then evaluated on seeded stochastic policies; a stochastic residual
/// can never exceed the deterministic one, and any disagreement fails the
/// check. Single-state games pass vacuously.
pub fn check_complete_state_transitivity(
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
    spot: &CstSpotCheck,
    tolerance: f64,
) -> Result<ConditionReport> {
    let d = residual_table(game, potential)?;
    let states = game.state_count();
    if states < 2 {
        return Ok(ConditionReport {
            condition: ConditionId::CompleteStateTransitivity,
            passed: true,
            vacuous: true,
            max_residual: 0.0,
            tolerance,
            witness: None,
            sub_checks: Vec::new(),
        });
    }
    let mut worst = 0.0;
    let mut witness = None;
    for agent in 0..game.agent_count() {
        let extremes: Vec<((f64, usize), (f64, usize))> = (0..states)
            .map(|s| {
                let row = d.row(agent, s);
                let (mut hi, mut lo) = ((f64::NEG_INFINITY, 0), (f64::INFINITY, 0));
                for (j, &v) in row.iter().enumerate() {
                    if v > hi.0 {
                        hi = (v, j);
                    }
                    if v < lo.0 {
                        lo = (v, j);
                    }
                }
                (hi, lo)
            })
            .collect();
        for (s, (hi, _)) in extremes.iter().enumerate() {
            for (t, (_, lo)) in extremes.iter().enumerate() {
                if s != t && better(hi.0 - lo.0, worst) {
                    worst = hi.0 - lo.0;
                    witness = Some(Witness::Profiles {
                        agent,
                        state_a: s,
                        joint_a: hi.1,
                        state_b: t,
                        joint_b: lo.1,
                    });
                }
            }
        }
    }
    let passed = worst <= tolerance;

    let mut rng = ChaCha8Rng::seed_from_u64(spot.seed);
    let space = game.joint_actions();
    let mut spot_worst: f64 = 0.0;
    for _ in 0..spot.policies {
        let policy = JointPolicy::random(game, &mut rng);
        let dists: Vec<Vec<f64>> = (0..states).map(|s| policy.joint_distribution(space, s)).collect();
        for agent in 0..game.agent_count() {
            let expected: Vec<f64> = (0..states)
                .map(|s| expectation(&dists[s], d.row(agent, s)))
                .collect();
            let hi = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = expected.iter().copied().fold(f64::INFINITY, f64::min);
            spot_worst = spot_worst.max(hi - lo);
        }
    }
    let consistent = !passed || spot_worst <= tolerance;
    Ok(ConditionReport {
        condition: ConditionId::CompleteStateTransitivity,
        passed: passed && consistent,
        vacuous: false,
        max_residual: worst,
        tolerance,
        witness,
        sub_checks: vec![SubCheck {
            name: "stochastic_spot_check".into(),
            passed: consistent,
            max_residual: spot_worst,
            witness: None,
        }],
    })
}
