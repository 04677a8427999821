//! Two-agent continuous game on `[0, 1]` in which a one-shot potential exists
//! yet the potential-maximising policy is not a Nash equilibrium, plus its
//! exact discretisation on a shared uniform grid.
//!
//! Agent 0 steers the state (`s' = a_0`) and pays `4 / (2 - a_1)`; agent 1
//! tracks the state. Payoffs are
//! `r_0 = s - (s - a_1)^2 - 4 / (2 - a_1)`, `r_1 = s - (s - a_1)^2` and the
//! potential is `s - (s - a_1)^2`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    build_dual_mdp, extract_joint_policy, value_iteration, verify_nash, DeterministicJointPolicy,
    NashReport, DEFAULT_MAX_ITERATIONS,
};
use crate::game::{evaluate_policy, InducedChain, JointPolicy, TabularStochasticGame};
use crate::potential::{
    calibrate_state_offsets, check_agent_independent_transitions, check_complete_state_transitivity,
    check_dummy_terms, check_state_transitivity, check_value_potential_alignment,
    find_one_shot_potential, AlignmentReport, ConditionReport, CstSpotCheck, DummyTermProbe,
    OneShotPotential,
};
use crate::{tolerance, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    /// Points in the grid shared by the states and both action sets.
    pub grid_size: usize,
    pub discount: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            grid_size: 101,
            discount: 0.9,
        }
    }
}

impl DiscretizationConfig {
    pub fn check(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least 2, got {}",
                self.grid_size
            )));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount {} not in (0, 1)",
                self.discount
            )));
        }
        Ok(())
    }

    /// Grid point `k / (N - 1)`.
    pub fn point(&self, index: usize) -> f64 {
        index as f64 / (self.grid_size - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.grid_size).map(|k| self.point(k)).collect()
    }
}

/// `(r_0, r_1, phi)` at a point of the continuous game.
pub fn closed_form(s: f64, a0: f64, a1: f64) -> Result<(f64, f64, f64)> {
    for (name, v) in [("s", s), ("a0", a0), ("a1", a1)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { name, value: v });
        }
    }
    let phi = s - (s - a1).powi(2);
    Ok((phi - 4.0 / (2.0 - a1), phi, phi))
}

/// Nearest grid index; halfway points go to the lower index.
pub fn snap_to_grid(config: &DiscretizationConfig, x: f64) -> Result<usize> {
    config.check()?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange { name: "x", value: x });
    }
    let scaled = x * (config.grid_size - 1) as f64;
    let lower = scaled.floor();
    let index = if scaled - lower > 0.5 { lower + 1.0 } else { lower };
    Ok((index as usize).min(config.grid_size - 1))
}

/// Game and closed-form potential on the grid. Joint action
/// `j = a_0 + N * a_1`; the kernel moves to the state whose index equals
/// agent 0's action.
pub fn discretize(config: &DiscretizationConfig) -> Result<(TabularStochasticGame, OneShotPotential)> {
    config.check()?;
    let n = config.grid_size;
    let x = config.points();
    let game = TabularStochasticGame::from_fn(
        vec![n, n],
        n,
        config.discount,
        |agent, s, a| {
            let (r0, r1, _) = closed_form(x[s], x[a[0]], x[a[1]]).expect("grid points lie in [0, 1]");
            if agent == 0 {
                r0
            } else {
                r1
            }
        },
        |_, a| [(a[0], 1.0)],
    )?
    .with_state_labels(x.clone());
    let potential = OneShotPotential::from_fn(&game, |s, a| {
        closed_form(x[s], x[a[0]], x[a[1]]).expect("grid points lie in [0, 1]").2
    })?;
    Ok((game, potential))
}

/// Potential maximiser `(a_0 = 1, a_1 = s)` and the Nash profile
/// `(a_0 = 0, a_1 = s)` as grid choice tables.
pub fn known_policies(config: &DiscretizationConfig) -> Result<(DeterministicJointPolicy, DeterministicJointPolicy)> {
    config.check()?;
    let n = config.grid_size;
    let track: Vec<usize> = (0..n).collect();
    let dual = DeterministicJointPolicy {
        choices: vec![vec![n - 1; n], track.clone()],
    };
    let nash = DeterministicJointPolicy {
        choices: vec![vec![0; n], track],
    };
    Ok((dual, nash))
}

/// Per-step average of `agent`'s payoff over the cycle that play from
/// `start` eventually enters. Needs a deterministic induced chain.
pub fn cycle_average(
    game: &TabularStochasticGame,
    policy: &JointPolicy,
    agent: usize,
    start: usize,
) -> Result<f64> {
    game.check_agent(agent)?;
    let chain = InducedChain::new(game, policy)?;
    let next = |s: usize| -> Result<usize> {
        match chain.row(s) {
            [(t, p)] if *p == 1.0 => Ok(*t),
            _ => Err(Error::InvalidArgument(format!(
                "play from state {s} is not deterministic"
            ))),
        }
    };
    let reward = |s: usize| -> Result<f64> {
        let dist = chain.joint_distribution(s);
        match dist.iter().position(|&w| w == 1.0) {
            Some(j) => Ok(game.payoff(agent, s, j)),
            None => Err(Error::InvalidArgument(format!(
                "policy at state {s} is not deterministic"
            ))),
        }
    };
    let mut seen = vec![usize::MAX; game.state_count()];
    let mut path = Vec::new();
    let mut s = start;
    while seen[s] == usize::MAX {
        seen[s] = path.len();
        path.push(s);
        s = next(s)?;
    }
    let cycle = &path[seen[s]..];
    let mut total = 0.0;
    for &c in cycle {
        total += reward(c)?;
    }
    Ok(total / cycle.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub checker_tolerance: f64,
    pub solver_tolerance: f64,
    /// Epsilon for the potential maximiser's Nash check.
    pub dual_epsilon: f64,
    /// Epsilon for the known Nash profile's check.
    pub nash_epsilon: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            checker_tolerance: tolerance::CHECKER,
            solver_tolerance: tolerance::SOLVER,
            dual_epsilon: 0.5,
            nash_epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub one_shot_potential: bool,
    pub agent_independent_transitions: bool,
    pub dummy_terms: bool,
    pub state_transitivity: bool,
    pub complete_state_transitivity: bool,
    pub dual_optimum_is_nash: bool,
    pub known_policy_is_nash: bool,
}

impl Verdicts {
    /// The outcome the construction is meant to produce.
    pub const EXPECTED: Verdicts = Verdicts {
        one_shot_potential: true,
        agent_independent_transitions: false,
        dummy_terms: false,
        state_transitivity: true,
        complete_state_transitivity: false,
        dual_optimum_is_nash: false,
        known_policy_is_nash: true,
    };
}

/// Start-state values of one policy, discounted and per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValues {
    pub start_state: usize,
    pub discounted: Vec<f64>,
    /// `(1 - gamma) V(s_0)`.
    pub normalized: Vec<f64>,
    /// Exact per-step payoff on the cycle that play enters.
    pub cycle_average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub config: DiscretizationConfig,
    pub settings: ReportSettings,
    pub verdicts: Verdicts,
    pub matches_expected: bool,
    pub potential_residual: f64,
    /// Largest gap between the calibrated potential and the closed form.
    pub potential_closed_form_error: f64,
    pub agent_independent_transitions: ConditionReport,
    pub dummy_terms: ConditionReport,
    pub state_transitivity: ConditionReport,
    pub complete_state_transitivity: ConditionReport,
    pub dual_values: Vec<f64>,
    pub dual_iterations: usize,
    pub dual_tied_states: Vec<usize>,
    pub dual_policy: DeterministicJointPolicy,
    pub dual_matches_known: bool,
    pub dual_nash: NashReport,
    pub known_nash: NashReport,
    /// `gamma / (1 - gamma)`, the predicted gap of the dual optimum.
    pub gap_oracle: f64,
    pub alignment: AlignmentReport,
    pub dual_policy_values: PolicyValues,
    pub known_policy_values: PolicyValues,
}

fn policy_values(game: &TabularStochasticGame, policy: &JointPolicy, tol: f64) -> Result<PolicyValues> {
    let gamma = game.discount();
    let mut out = PolicyValues {
        start_state: 0,
        discounted: Vec::new(),
        normalized: Vec::new(),
        cycle_average: Vec::new(),
    };
    for agent in 0..game.agent_count() {
        let v = evaluate_policy(game, policy, agent, tol)?.values[0];
        out.discounted.push(v);
        out.normalized.push((1.0 - gamma) * v);
        out.cycle_average.push(cycle_average(game, policy, agent, 0)?);
    }
    Ok(out)
}

pub fn reproduce_report(config: &DiscretizationConfig) -> Result<CounterexampleReport> {
    reproduce_report_with(config, &ReportSettings::default())
}

pub fn reproduce_report_with(
    config: &DiscretizationConfig,
    settings: &ReportSettings,
) -> Result<CounterexampleReport> {
    let (game, closed) = discretize(config)?;
    let check_tol = settings.checker_tolerance;
    let solve_tol = settings.solver_tolerance;

    let (found, potential_residual) = match find_one_shot_potential(&game, check_tol) {
        Ok(p) => {
            let r = p.verification_residual();
            (Some(p), r)
        }
        Err(e) => (None, e.residual),
    };
    // Without a potential the conditions are checked against the closed form.
    let potential = match &found {
        Some(p) => calibrate_state_offsets(&game, p)?,
        None => closed.clone(),
    };
    let potential_closed_form_error = potential
        .table()
        .iter()
        .zip(closed.table())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let c1 = check_agent_independent_transitions(&game, check_tol);
    let c2 = check_dummy_terms(&game, &potential, &DummyTermProbe::default(), check_tol)?;
    let c3 = check_state_transitivity(&game, &potential, check_tol)?;
    let cst = check_complete_state_transitivity(&game, &potential, &CstSpotCheck::default(), check_tol)?;

    let dual = build_dual_mdp(&game, &potential)?;
    let solution = value_iteration(&dual, solve_tol, DEFAULT_MAX_ITERATIONS)?;
    let dual_policy = extract_joint_policy(&solution.decisions, &game)?;
    let (known_dual, known_nash) = known_policies(config)?;
    let dual_joint = dual_policy.to_joint_policy(&game);
    let nash_joint = known_nash.to_joint_policy(&game);

    let dual_nash = verify_nash(&game, &dual_joint, settings.dual_epsilon, solve_tol)?;
    let known_report = verify_nash(&game, &nash_joint, settings.nash_epsilon, solve_tol)?;
    let deviation = dual_joint.with_agent_table(0, nash_joint.tables[0].clone());
    let alignment = check_value_potential_alignment(&game, &potential, &dual_joint, 0, &deviation, 0, solve_tol)?;

    let verdicts = Verdicts {
        one_shot_potential: found.is_some(),
        agent_independent_transitions: c1.passed,
        dummy_terms: c2.passed,
        state_transitivity: c3.passed,
        complete_state_transitivity: cst.passed,
        dual_optimum_is_nash: dual_nash.passed,
        known_policy_is_nash: known_report.passed,
    };
    let gamma = config.discount;
    Ok(CounterexampleReport {
        config: *config,
        settings: *settings,
        verdicts,
        matches_expected: verdicts == Verdicts::EXPECTED,
        potential_residual,
        potential_closed_form_error,
        agent_independent_transitions: c1,
        dummy_terms: c2,
        state_transitivity: c3,
        complete_state_transitivity: cst,
        dual_values: solution.value.values,
        dual_iterations: solution.iterations,
        dual_tied_states: solution.tied_states,
        dual_matches_known: dual_policy == known_dual,
        dual_policy_values: policy_values(&game, &dual_joint, solve_tol)?,
        known_policy_values: policy_values(&game, &nash_joint, solve_tol)?,
        dual_policy,
        dual_nash,
        known_nash: known_report,
        gap_oracle: gamma / (1.0 - gamma),
        alignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_points() {
        let (r0, r1, phi) = closed_form(0.5, 0.3, 0.5).unwrap();
        assert!((r0 - (0.5 - 8.0 / 3.0)).abs() < 1e-15);
        assert_eq!((r1, phi), (0.5, 0.5));
        assert_eq!(closed_form(1.0, 0.0, 1.0).unwrap(), (-3.0, 1.0, 1.0));
        assert_eq!(closed_form(0.0, 1.0, 0.0).unwrap(), (-2.0, 0.0, 0.0));
        assert!(closed_form(1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn snapping_breaks_ties_low() {
        let config = DiscretizationConfig { grid_size: 3, discount: 0.9 };
        assert_eq!(snap_to_grid(&config, 0.25).unwrap(), 0);
        assert_eq!(snap_to_grid(&config, 0.26).unwrap(), 1);
        assert_eq!(snap_to_grid(&config, 1.0).unwrap(), 2);
    }

    #[test]
    fn two_point_grid() {
        let (game, phi) = discretize(&DiscretizationConfig { grid_size: 2, discount: 0.9 }).unwrap();
        assert_eq!((game.state_count(), game.joint_count()), (2, 4));
        assert_eq!(game.payoff(0, 0, 0), -2.0);
        for a1 in 0..2 {
            assert_eq!(game.kernel().row(0, 1 + 2 * a1), &[(1, 1.0)]);
        }
        assert!(phi.verification_residual() < 1e-12);
    }

    #[test]
    fn known_policies_on_three_points() {
        let (dual, nash) = known_policies(&DiscretizationConfig { grid_size: 3, discount: 0.9 }).unwrap();
        assert_eq!(dual.choices, vec![vec![2, 2, 2], vec![0, 1, 2]]);
        assert_eq!(nash.choices[0], vec![0, 0, 0]);
    }
}
