mod common;

use common::{brute_chain, rng, sup, truncated_sum};
use mpg_core::game::{
    evaluate_policy, finite_horizon_value, horizon_for_epsilon, k_step_transition, random_game, sample_trajectory,
    validate_game, JointPolicy, Kernel, RewardSource, TabularStochasticGame, ViolationKind,
};
use mpg_core::Error;
use proptest::prelude::*;

#[test]
fn evaluation_matches_long_truncated_sum() {
    for seed in 0..10 {
        let game = random_game(seed, &[2, 3], 3, 0.8).unwrap();
        let policy = JointPolicy::random(&game, &mut rng(seed + 100));
        for agent in 0..2 {
            let v = evaluate_policy(&game, &policy, agent, 1e-12).unwrap();
            let (p, r) = brute_chain(&game, &policy, agent);
            // 0.8^200 * |r|/(1-0.8) is far below the tolerance
            let oracle = truncated_sum(&p, &r, 0.8, 200);
            assert!(sup(&v.values, oracle.as_slice()) < 1e-10);
        }
    }
}

#[test]
fn finite_horizon_matches_matrix_powers() {
    let game = random_game(7, &[2, 2], 4, 0.9).unwrap();
    let policy = JointPolicy::random(&game, &mut rng(1));
    let (p, r) = brute_chain(&game, &policy, 1);
    for horizon in 0..6 {
        let v = finite_horizon_value(&game, RewardSource::Agent(1), &policy, horizon).unwrap();
        assert!(sup(&v.values, truncated_sum(&p, &r, 0.9, horizon).as_slice()) < 1e-12);
    }
}

#[test]
fn horizon_examples() {
    assert_eq!(horizon_for_epsilon(0.01, 0.9, 3.0).unwrap(), 76);
    assert_eq!(horizon_for_epsilon(0.01, 0.9, 0.0).unwrap(), 0);
    assert_eq!(horizon_for_epsilon(100.0, 0.9, 1.0).unwrap(), 1);
    assert!(horizon_for_epsilon(0.0, 0.9, 1.0).is_err());
    assert!(horizon_for_epsilon(0.1, 1.0, 1.0).is_err());
}

#[test]
fn truncation_error_respects_the_horizon_bound() {
    for seed in 0..5 {
        let game = random_game(seed, &[3], 3, 0.85).unwrap();
        let policy = JointPolicy::random(&game, &mut rng(seed));
        let h = horizon_for_epsilon(1e-3, 0.85, game.max_abs_payoff()).unwrap();
        let full = evaluate_policy(&game, &policy, 0, 1e-12).unwrap();
        let cut = finite_horizon_value(&game, RewardSource::Agent(0), &policy, h).unwrap();
        assert!(full.sup_distance(&cut) < 1e-3);
    }
}

#[test]
fn k_step_matches_brute_powers() {
    let game = random_game(3, &[2, 2], 3, 0.9).unwrap();
    let policy = JointPolicy::random(&game, &mut rng(3));
    let (p, _) = brute_chain(&game, &policy, 0);
    let mut power = nalgebra::DMatrix::identity(3, 3);
    for k in 0..5 {
        let m = k_step_transition(&game, &policy, k).unwrap();
        assert!((m - &power).abs().max() < 1e-12);
        power = &power * &p;
    }
}

#[test]
fn bad_row_sum_names_the_row() {
    let raw = TabularStochasticGame::from_parts(
        vec![1],
        1,
        vec![0.0],
        Kernel::from_fn(1, 1, |_, _| [(0, 0.9)]),
        0.5,
        None,
    );
    let report = validate_game(&raw);
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].path, "transitions[0][0]");
    assert!(matches!(report.violations[0].kind, ViolationKind::TransitionRowSum { .. }));
    let err = TabularStochasticGame::new(vec![1], 1, vec![0.0], Kernel::from_fn(1, 1, |_, _| [(0, 0.9)]), 0.5, None);
    assert!(matches!(err, Err(Error::InvalidGame(_))));
}

#[test]
fn trajectories_are_seed_deterministic_and_follow_support() {
    let game = TabularStochasticGame::from_fn(vec![2], 3, 0.9, |_, s, a| (s + a[0]) as f64, |s, _| [((s + 1) % 3, 1.0)])
        .unwrap();
    let policy = JointPolicy::uniform(&game);
    let a = sample_trajectory(&game, &policy, 0, 10, 42).unwrap();
    let b = sample_trajectory(&game, &policy, 0, 10, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.states.len(), 11);
    for (t, w) in a.states.windows(2).enumerate() {
        assert_eq!(w[1], (w[0] + 1) % 3, "step {t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_powers_are_stochastic_and_compose(seed in 0u64..1000, k1 in 0usize..4, k2 in 0usize..4) {
        let game = random_game(seed, &[2, 2], 3, 0.9).unwrap();
        let policy = JointPolicy::random(&game, &mut rng(seed ^ 0xabc));
        let a = k_step_transition(&game, &policy, k1).unwrap();
        let b = k_step_transition(&game, &policy, k2).unwrap();
        let ab = k_step_transition(&game, &policy, k1 + k2).unwrap();
        prop_assert!((&a * &b - &ab).abs().max() < 1e-10);
        for row in ab.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn value_is_a_bellman_fixed_point(seed in 0u64..1000, gamma in 0.1f64..0.95) {
        let game = random_game(seed, &[2], 4, gamma).unwrap();
        let policy = JointPolicy::random(&game, &mut rng(seed));
        let v = evaluate_policy(&game, &policy, 0, 1e-11).unwrap();
        let (p, r) = brute_chain(&game, &policy, 0);
        let backed = r + gamma * (p * nalgebra::DVector::from_vec(v.values.clone()));
        prop_assert!(sup(backed.as_slice(), &v.values) < 1e-9);
    }

    #[test]
    fn value_shift_by_constant_payoff(seed in 0u64..1000, c in -5.0f64..5.0) {
        // adding c to every payoff shifts the value by c / (1 - gamma)
        let base = random_game(seed, &[2, 2], 2, 0.7).unwrap();
        let shifted = TabularStochasticGame::from_fn(
            vec![2, 2], 2, 0.7,
            |i, s, a| base.payoff(i, s, base.joint_actions().encode(a)) + c,
            |s, a| base.kernel().row(s, base.joint_actions().encode(a)).to_vec(),
        ).unwrap();
        let policy = JointPolicy::random(&base, &mut rng(seed));
        let v0 = evaluate_policy(&base, &policy, 0, 1e-12).unwrap();
        let v1 = evaluate_policy(&shifted, &policy, 0, 1e-12).unwrap();
        for (a, b) in v0.values.iter().zip(&v1.values) {
            prop_assert!((b - a - c / 0.3).abs() < 1e-9);
        }
    }
}
