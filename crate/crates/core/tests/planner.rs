mod common;

use common::{max_abs_diff, random_belief, random_model, rng, Shape};
use ipteach::harness::fixtures::{two_door, two_door_belief};
use ipteach::harness::oracle::{brute_force_expectimax, brute_force_value};
use ipteach::planner::{expected_utility, select_action, PlanConfig};
use ipteach::pomdp::entropy_bits;
use proptest::prelude::*;

const ORACLE_SIZE: Shape = Shape {
    max_states: 4,
    max_actions: 3,
    max_observations: 3,
    identity: false,
};

#[test]
fn q_values_match_brute_force() {
    let mut r = rng(21);
    for _ in 0..100 {
        let m = random_model(&mut r, &ORACLE_SIZE);
        let b = random_belief(&mut r, m.num_states());
        for h in 1..=3 {
            let got = select_action(&m, &b, &PlanConfig::with_horizon(h)).unwrap();
            let want = brute_force_expectimax(&m, &b, h).unwrap();
            assert!(max_abs_diff(&got.q_values, &want) <= 1e-12, "horizon {h}");
        }
    }
}

#[test]
fn two_door_prefers_the_accurate_listen() {
    let m = two_door(0.9);
    let b = two_door_belief(0.5);
    for h in 1..=4 {
        let res = select_action(&m, &b, &PlanConfig::with_horizon(h)).unwrap();
        assert_eq!(m.actions()[res.chosen_action], "listen-good", "horizon {h}");
        let oracle = brute_force_expectimax(&m, &b, h).unwrap();
        assert!(max_abs_diff(&res.q_values, &oracle) <= 1e-12);
    }
}

#[test]
fn two_door_expected_posterior_entropies() {
    let m = two_door(0.9);
    let b = two_door_belief(0.5);
    let expect = |a: usize| -> f64 {
        m.expand(&b, a)
            .unwrap()
            .iter()
            .map(|(_, p, post)| p * entropy_bits(&[post.probs()[0] + post.probs()[1], post.probs()[2] + post.probs()[3]]))
            .sum()
    };
    assert!((expect(0) - 0.6098403047164004).abs() < 1e-12);
    assert!((expect(1) - 0.9709505944546686).abs() < 1e-12);
    let q = select_action(&m, &b, &PlanConfig::with_horizon(1)).unwrap().q_values;
    assert!((q[0] - (-1.0 - 0.9 * 0.6098403047164004)).abs() < 1e-12);
    assert!((q[1] - (-1.0 - 0.9 * 0.9709505944546686)).abs() < 1e-12);
}

#[test]
fn horizon_zero_is_the_immediate_utility() {
    let mut r = rng(22);
    for _ in 0..100 {
        let m = random_model(&mut r, &ORACLE_SIZE);
        let b = random_belief(&mut r, m.num_states());
        let eu = expected_utility(&m, &b, &PlanConfig::with_horizon(1), 0).unwrap();
        assert_eq!(eu, m.utility_eval(&b).unwrap());
        assert_eq!(eu, brute_force_value(&m, &b, 0).unwrap());
        assert!(brute_force_expectimax(&m, &b, 0).unwrap().iter().all(|&q| q == eu));
    }
}

#[test]
fn zero_discount_ties_every_action() {
    let mut r = rng(23);
    for _ in 0..100 {
        let m = random_model(&mut r, &ORACLE_SIZE);
        let b = random_belief(&mut r, m.num_states());
        let cfg = PlanConfig {
            discount_override: Some(0.0),
            ..PlanConfig::with_horizon(2)
        };
        let res = select_action(&m, &b, &cfg).unwrap();
        assert!(res.q_values.iter().all(|&q| q == res.q_values[0]));
        assert_eq!(res.chosen_action, 0);
    }
}

#[test]
fn uncapped_equals_generous_cap() {
    let mut r = rng(24);
    for _ in 0..30 {
        let m = random_model(&mut r, &ORACLE_SIZE);
        let b = random_belief(&mut r, m.num_states());
        let plain = select_action(&m, &b, &PlanConfig::with_horizon(2)).unwrap();
        let capped = PlanConfig {
            observation_branch_cap: Some(m.num_observations()),
            ..PlanConfig::with_horizon(2)
        };
        assert_eq!(select_action(&m, &b, &capped).unwrap().q_values, plain.q_values);
    }
}

#[test]
fn tight_cap_prunes_branches() {
    let m = two_door(0.9);
    let cfg = PlanConfig {
        observation_branch_cap: Some(1),
        ..PlanConfig::with_horizon(2)
    };
    let res = select_action(&m, &two_door_belief(0.5), &cfg).unwrap();
    assert!(res.branches_pruned > 0);
}

#[test]
fn invalid_configs_are_rejected() {
    let m = two_door(0.9);
    let b = two_door_belief(0.5);
    assert!(select_action(&m, &b, &PlanConfig::with_horizon(0)).is_err());
    let cfg = PlanConfig {
        observation_branch_cap: Some(0),
        ..PlanConfig::with_horizon(1)
    };
    assert!(select_action(&m, &b, &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn planning_is_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r, &ORACLE_SIZE);
        let b = random_belief(&mut r, m.num_states());
        let cfg = PlanConfig::with_horizon(3);
        prop_assert_eq!(select_action(&m, &b, &cfg).unwrap(), select_action(&m, &b, &cfg).unwrap());
    }

    #[test]
    fn single_action_is_always_chosen(seed in any::<u64>()) {
        let shape = Shape { max_actions: 1, ..ORACLE_SIZE };
        let mut r = rng(seed);
        let m = random_model(&mut r, &shape);
        let b = random_belief(&mut r, m.num_states());
        prop_assert_eq!(select_action(&m, &b, &PlanConfig::with_horizon(2)).unwrap().chosen_action, 0);
    }
}
