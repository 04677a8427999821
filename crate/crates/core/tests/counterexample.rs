use mpg_core::counterexample::{
    closed_form, cycle_average, discretize, known_policies, reproduce_report, DiscretizationConfig, Verdicts,
};

fn config(n: usize, gamma: f64) -> DiscretizationConfig {
    DiscretizationConfig { grid_size: n, discount: gamma }
}

#[test]
fn closed_form_examples() {
    let (r0, r1, phi) = closed_form(0.5, 0.9, 0.5).unwrap();
    assert!((r0 + 2.1666667).abs() < 1e-7);
    assert_eq!((r1, phi), (0.5, 0.5));
    assert_eq!(closed_form(1.0, 0.2, 1.0).unwrap(), (-3.0, 1.0, 1.0));
    assert_eq!(closed_form(0.0, 0.7, 0.0).unwrap(), (-2.0, 0.0, 0.0));
    assert!(closed_form(0.0, -0.1, 0.0).is_err());
}

#[test]
fn kernel_rows_are_single_unit_entries() {
    for n in [2usize, 7] {
        let (game, phi) = discretize(&config(n, 0.9)).unwrap();
        assert!(phi.verification_residual() < 1e-12);
        for s in 0..n {
            for j in 0..game.joint_count() {
                let row = game.kernel().row(s, j);
                assert_eq!(row, &[(j % n, 1.0)]);
            }
        }
    }
}

#[test]
fn known_policies_are_valid_for_every_grid() {
    for n in 2..12 {
        let c = config(n, 0.9);
        let (game, _) = discretize(&c).unwrap();
        let (dual, nash) = known_policies(&c).unwrap();
        dual.check(&game).unwrap();
        nash.check(&game).unwrap();
        assert!(nash.choices[0].iter().all(|&a| a == 0));
    }
}

#[test]
fn verdicts_are_stable_across_grids() {
    for n in [2usize, 11, 51, 101] {
        let report = reproduce_report(&config(n, 0.9)).unwrap();
        assert_eq!(report.verdicts, Verdicts::EXPECTED, "N = {n}");
        assert!(report.matches_expected);
        assert!(report.dual_matches_known);
        assert!(report.potential_residual < 1e-12);
        assert!(report.potential_closed_form_error < 1e-12);
        assert!((report.dual_nash.per_agent_gap[0] - 9.0).abs() < 1e-6);
        assert_eq!((report.dual_nash.witness_agent, report.dual_nash.witness_state), (0, 0));
        assert!((report.complete_state_transitivity.max_residual - 2.0).abs() < 1e-9);
        assert!(report.state_transitivity.max_residual < 1e-12);
        assert!((report.alignment.misalignment - 18.0).abs() < 1e-6);
    }
}

#[test]
fn gap_follows_the_discount() {
    for gamma in [0.5, 0.75, 0.95] {
        let report = reproduce_report(&config(11, gamma)).unwrap();
        let oracle = gamma / (1.0 - gamma);
        assert_eq!(report.gap_oracle, oracle);
        assert!((report.dual_nash.per_agent_gap[0] - oracle).abs() < 0.01);
        assert_eq!(report.verdicts, Verdicts::EXPECTED);
    }
}

#[test]
fn nash_values_and_averages() {
    let c = config(11, 0.9);
    let report = reproduce_report(&c).unwrap();
    let v = &report.known_policy_values;
    assert!((v.discounted[0] + 20.0).abs() < 1e-6);
    assert!(v.discounted[1].abs() < 1e-6);
    assert_eq!(v.cycle_average, vec![-2.0, 0.0]);
    assert!((v.normalized[0] + 2.0).abs() < 1e-9);
    let d = &report.dual_policy_values;
    assert!((d.discounted[0] + 29.0).abs() < 1e-6);
    assert_eq!(d.cycle_average, vec![-3.0, 1.0]);

    let (game, _) = discretize(&c).unwrap();
    let (dual, _) = known_policies(&c).unwrap();
    // from state 0.5 the dual play jumps to 1 and stays
    assert_eq!(cycle_average(&game, &dual.to_joint_policy(&game), 1, 5).unwrap(), 1.0);
}
