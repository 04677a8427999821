mod common;

use common::rng;
use mpg_core::counterexample::{closed_form, discretize, known_policies, DiscretizationConfig};
use mpg_core::equilibrium::{
    best_response_mdp, build_dual_mdp, extract_joint_policy, nash_gap, value_iteration, verify_nash, Mdp,
};
use mpg_core::game::{evaluate_policy, random_game, JointPolicy, Kernel, TabularStochasticGame};
use mpg_core::potential::{check_agent_independent_transitions, find_one_shot_potential, OneShotPotential};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-10;

fn grid(n: usize) -> DiscretizationConfig {
    DiscretizationConfig { grid_size: n, discount: 0.9 }
}

#[test]
fn dual_mdp_copies_potential_and_kernel() {
    let config = grid(3);
    let (game, phi) = discretize(&config).unwrap();
    let mdp = build_dual_mdp(&game, &phi).unwrap();
    assert_eq!(mdp.rewards(), phi.table());
    assert_eq!(mdp.kernel(), game.kernel());
    assert_eq!(mdp.discount(), 0.9);
    // s = 0.5 and a_1 = 0.5 give 0.5 whatever agent 0 plays
    for a0 in 0..3 {
        assert_eq!(mdp.reward(1, a0 + 3), 0.5);
    }
}

#[test]
fn dual_mdp_rejects_wrong_shape() {
    let (game, _) = discretize(&grid(3)).unwrap();
    let small = random_game(0, &[2], 3, 0.9).unwrap();
    let phi = OneShotPotential::from_table(&small, vec![0.0; 6]).unwrap();
    assert!(build_dual_mdp(&game, &phi).is_err());
}

#[test]
fn dual_optimum_on_eleven_points() {
    let config = grid(11);
    let (game, phi) = discretize(&config).unwrap();
    let solution = value_iteration(&build_dual_mdp(&game, &phi).unwrap(), TOL, 100_000).unwrap();
    for s in 0..11 {
        assert!((solution.value.values[s] - (config.point(s) + 9.0)).abs() <= TOL);
        let space = game.joint_actions();
        assert_eq!(space.own_action(solution.decisions[s], 0), 10);
        assert_eq!(space.own_action(solution.decisions[s], 1), s);
    }
    assert!(solution.tied_states.is_empty());
}

#[test]
fn extracted_dual_policy_on_three_points() {
    let (game, phi) = discretize(&grid(3)).unwrap();
    let solution = value_iteration(&build_dual_mdp(&game, &phi).unwrap(), TOL, 100_000).unwrap();
    let policy = extract_joint_policy(&solution.decisions, &game).unwrap();
    assert_eq!(policy.choices, vec![vec![2, 2, 2], vec![0, 1, 2]]);
}

#[test]
fn single_agent_extraction_is_identity() {
    let game = random_game(4, &[4], 5, 0.9).unwrap();
    let decisions = vec![3, 0, 2, 1, 1];
    let policy = extract_joint_policy(&decisions, &game).unwrap();
    assert_eq!(policy.choices, vec![decisions.clone()]);
    assert_eq!(policy.flatten(&game), decisions);
}

#[test]
fn best_response_reduces_to_the_closed_form() {
    for n in [11usize, 51, 101] {
        let config = grid(n);
        let (game, _) = discretize(&config).unwrap();
        let (dual, _) = known_policies(&config).unwrap();
        let mdp = best_response_mdp(&game, &dual.to_joint_policy(&game), 0).unwrap();
        for s in 0..n {
            let x = config.point(s);
            for a in 0..n {
                assert!((mdp.reward(s, a) - (x - 4.0 / (2.0 - x))).abs() < 1e-12);
                assert_eq!(mdp.kernel().row(s, a), &[(a, 1.0)]);
            }
        }
        if n == 11 {
            let solution = value_iteration(&mdp, TOL, 100_000).unwrap();
            assert!(solution.decisions.iter().all(|&d| d == 0));
            assert!((solution.value.values[0] + 20.0).abs() <= TOL);
        }
    }
}

#[test]
fn closed_form_per_step_payoff_is_decreasing() {
    let config = grid(101);
    let f = |k: usize| closed_form(config.point(k), 0.0, config.point(k)).unwrap().0;
    for k in 0..100 {
        assert!(f(k + 1) < f(k));
    }
}

#[test]
fn counterexample_nash_checks() {
    let config = grid(11);
    let (game, _) = discretize(&config).unwrap();
    let (dual, nash) = known_policies(&config).unwrap();
    let report = verify_nash(&game, &dual.to_joint_policy(&game), 0.5, TOL).unwrap();
    assert!(!report.passed);
    assert!((report.per_agent_gap[0] - 9.0).abs() < 0.01);
    assert_eq!((report.witness_agent, report.witness_state), (0, 0));
    assert!((report.policy_values[0][0] + 29.0).abs() < 1e-9);
    assert!((report.best_response_values[0][0] + 20.0).abs() < 1e-9);
    assert!((nash_gap(&game, &dual.to_joint_policy(&game), TOL).unwrap() - 9.0).abs() < 0.01);

    let report = verify_nash(&game, &nash.to_joint_policy(&game), 1e-6, TOL).unwrap();
    assert!(report.passed);
    assert!(report.max_gap <= TOL);
}

#[test]
fn gap_is_stable_across_grids() {
    for n in [11usize, 51, 101] {
        let config = grid(n);
        let (game, phi) = discretize(&config).unwrap();
        let solution = value_iteration(&build_dual_mdp(&game, &phi).unwrap(), TOL, 100_000).unwrap();
        let policy = extract_joint_policy(&solution.decisions, &game).unwrap();
        let report = verify_nash(&game, &policy.to_joint_policy(&game), 0.5, TOL).unwrap();
        assert!((report.per_agent_gap[0] - 9.0).abs() < 1e-6, "N = {n}");
    }
}

#[test]
fn single_agent_greedy_policy_is_nash() {
    for seed in 0..10 {
        let game = random_game(seed, &[3], 4, 0.85).unwrap();
        let mdp = best_response_mdp(&game, &JointPolicy::uniform(&game), 0).unwrap();
        let solution = value_iteration(&mdp, TOL, 100_000).unwrap();
        let policy = extract_joint_policy(&solution.decisions, &game).unwrap();
        let report = verify_nash(&game, &policy.to_joint_policy(&game), 10.0 * TOL, TOL).unwrap();
        assert!(report.passed, "seed {seed}: gap {}", report.max_gap);
    }
}

#[test]
fn gap_ignores_agent_order() {
    let game = random_game(9, &[2, 3], 3, 0.8).unwrap();
    let policy = JointPolicy::random(&game, &mut rng(9));
    // same game with the agents swapped
    let swapped = TabularStochasticGame::from_fn(
        vec![3, 2],
        3,
        0.8,
        |i, s, a| game.payoff(1 - i, s, game.joint_actions().encode(&[a[1], a[0]])),
        |s, a| game.kernel().row(s, game.joint_actions().encode(&[a[1], a[0]])).to_vec(),
    )
    .unwrap();
    let swapped_policy = JointPolicy::new(vec![policy.tables[1].clone(), policy.tables[0].clone()]);
    let a = nash_gap(&game, &policy, TOL).unwrap();
    let b = nash_gap(&swapped, &swapped_policy, TOL).unwrap();
    assert!((a - b).abs() < 1e-9);
}

/// Identical-interest game whose kernel ignores the joint action.
fn condition_one_game(seed: u64) -> TabularStochasticGame {
    let mut r = rng(seed);
    let states = 2 + (seed % 3) as usize;
    let counts = vec![2, 2 + (seed % 2) as usize];
    let joints: usize = counts.iter().product();
    let phi: Vec<f64> = (0..states * joints).map(|_| r.random_range(-1.0..1.0)).collect();
    let dummy: Vec<f64> = (0..states * 3).map(|_| r.random_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..states)
        .map(|_| {
            let w: Vec<f64> = (0..states).map(|_| r.random::<f64>() + 0.01).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).enumerate().collect()
        })
        .collect();
    TabularStochasticGame::from_fn(
        counts.clone(),
        states,
        0.9,
        |i, s, a| {
            let j = a[0] + counts[0] * a[1];
            phi[s * joints + j] + if i == 0 { dummy[s * 3 + a[1]] } else { 0.0 }
        },
        |s, _| rows[s].clone(),
    )
    .unwrap()
}

#[test]
fn dual_optimum_is_nash_under_agent_independent_transitions() {
    for seed in 0..20 {
        let game = condition_one_game(seed);
        assert!(check_agent_independent_transitions(&game, 1e-9).passed);
        let phi = find_one_shot_potential(&game, 1e-9).unwrap();
        let solution = value_iteration(&build_dual_mdp(&game, &phi).unwrap(), TOL, 100_000).unwrap();
        let policy = extract_joint_policy(&solution.decisions, &game).unwrap();
        let report = verify_nash(&game, &policy.to_joint_policy(&game), 10.0 * TOL, TOL).unwrap();
        assert!(report.passed, "seed {seed}: gap {}", report.max_gap);
    }
}

fn random_mdp(seed: u64, states: usize, decisions: usize, gamma: f64) -> Mdp {
    let mut r = rng(seed);
    let reward: Vec<f64> = (0..states * decisions).map(|_| r.random_range(-1.0..1.0)).collect();
    let kernel = Kernel::from_fn(states, decisions, |_, _| {
        let w: Vec<f64> = (0..states).map(|_| r.random::<f64>()).collect();
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).enumerate().collect::<Vec<_>>()
    });
    Mdp::new(states, decisions, reward, kernel, gamma).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn greedy_policy_is_near_optimal(seed in 0u64..10_000, gamma in 0.3f64..0.95, tol in 1e-8f64..1e-3) {
        let mdp = random_mdp(seed, 5, 3, gamma);
        let solution = value_iteration(&mdp, tol, 1_000_000).unwrap();
        prop_assert!(mdp.optimality_residual(&solution.value.values) <= tol);
        let greedy = mdp.evaluate_decisions(&solution.decisions, 1e-12).unwrap();
        let bound = 2.0 * tol / (1.0 - gamma);
        prop_assert!(greedy.sup_distance(&solution.value) <= bound);
    }

    #[test]
    fn best_response_dominates(seed in 0u64..10_000) {
        let game = random_game(seed, &[2, 3], 3, 0.85).unwrap();
        let policy = JointPolicy::random(&game, &mut rng(seed));
        let report = verify_nash(&game, &policy, 0.0, TOL).unwrap();
        for agent in 0..2 {
            let v = evaluate_policy(&game, &policy, agent, TOL).unwrap();
            for s in 0..3 {
                prop_assert!(report.best_response_values[agent][s] >= v.values[s] - TOL);
            }
            prop_assert!(report.per_agent_gap[agent] >= -TOL);
        }
    }

    #[test]
    fn extraction_round_trips(seed in 0u64..10_000) {
        let game = random_game(seed, &[2, 3, 2], 4, 0.9).unwrap();
        let mut r = rng(seed);
        let decisions: Vec<usize> = (0..4).map(|_| r.random_range(0..12)).collect();
        let policy = extract_joint_policy(&decisions, &game).unwrap();
        prop_assert_eq!(policy.flatten(&game), decisions);
    }
}
