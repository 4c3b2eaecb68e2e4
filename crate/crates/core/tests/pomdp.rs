mod common;

use common::{max_abs_diff, random_belief, random_model, rng, Shape};
use ipteach::harness::oracle::enumerate_update;
use ipteach::pomdp::{entropy_bits, Belief, PomdpModel};
use ipteach::Error;
use proptest::prelude::*;
use rand::Rng;

const SMALL: Shape = Shape {
    max_states: 5,
    max_actions: 3,
    max_observations: 3,
    identity: false,
};

#[test]
fn update_matches_joint_enumeration() {
    let mut r = rng(11);
    let mut compared = 0;
    for _ in 0..500 {
        let m = random_model(&mut r, &SMALL);
        let b = random_belief(&mut r, m.num_states());
        let a = r.gen_range(0..m.num_actions());
        for o in 0..m.num_observations() {
            match (m.belief_update(&b, a, o), enumerate_update(&m, &b, a, o)) {
                (Ok(post), Some(reference)) => {
                    assert!(max_abs_diff(post.probs(), &reference) <= 1e-12);
                    compared += 1;
                }
                (Err(Error::ZeroNormalizer), None) => {}
                (got, want) => panic!("engine {got:?} vs enumeration {want:?}"),
            }
        }
    }
    assert!(compared > 500);
}

#[test]
fn impossible_observation_is_an_error() {
    let m = PomdpModel::from_dense(
        vec!["a".into(), "b".into()],
        vec!["stay".into()],
        vec!["x".into(), "y".into()],
        &[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
        &[vec![1.0, 0.0], vec![1.0, 0.0]],
        ipteach::pomdp::UtilitySpec::NegEntropy,
        0.9,
        None,
    )
    .unwrap();
    assert!(matches!(
        m.belief_update(&Belief::uniform(2), 0, 1),
        Err(Error::ZeroNormalizer)
    ));
}

#[test]
fn expected_entropy_never_grows_under_identity_transitions() {
    let shape = Shape {
        identity: true,
        ..SMALL
    };
    let mut r = rng(12);
    for _ in 0..500 {
        let m = random_model(&mut r, &shape);
        let b = random_belief(&mut r, m.num_states());
        for a in 0..m.num_actions() {
            let expected: f64 = m
                .expand(&b, a)
                .unwrap()
                .iter()
                .map(|(_, p, post)| p * entropy_bits(post.probs()))
                .sum();
            assert!(expected <= entropy_bits(b.probs()) + 1e-12);
        }
    }
}

#[test]
fn model_json_roundtrip() {
    let mut r = rng(13);
    for _ in 0..50 {
        let m = random_model(&mut r, &SMALL);
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let back = PomdpModel::from_json_str(&text).unwrap();
        assert_eq!(back, m);
    }
}

#[test]
fn rejects_non_stochastic_rows() {
    let bad = r#"{"format":"pomdp/1","states":["a"],"actions":["x"],"observations":["o"],
        "transition":[[[0.5]]],"observation_model":[[1.0]],"utility":{"kind":"neg_entropy"},"discount":0.9}"#;
    assert!(PomdpModel::from_json_str(bad).is_err());
}

proptest! {
    #[test]
    fn posterior_is_a_valid_belief(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r, &SMALL);
        let b = random_belief(&mut r, m.num_states());
        for (_, p, post) in m.expand(&b, 0).unwrap() {
            prop_assert!(p > 0.0);
            let s: f64 = post.probs().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(post.probs().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn observation_likelihoods_sum_to_one(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r, &SMALL);
        let b = random_belief(&mut r, m.num_states());
        let lik = m.observation_likelihood(&b, 0).unwrap();
        prop_assert!((lik.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn entropy_is_bounded(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let b = random_belief(&mut r, n);
        let h = entropy_bits(b.probs());
        prop_assert!(h >= 0.0 && h <= (n as f64).log2() + 1e-12);
    }
}
