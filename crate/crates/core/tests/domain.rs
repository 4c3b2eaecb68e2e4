mod common;

use std::sync::Arc;

use common::rng;
use ipteach::domain::{
    build_student_ipomdp, level0_teacher_policy, signal_observation_model, Concept, DomainConfig,
    GameState, Last, NoiseConfig, Pending, StudentAction, Turn,
};
use ipteach::harness::{Channel, Episode};
use ipteach::nesting::{expand_interactive, solve_level_k, AgentModel, InteractiveBelief, NestingConfig};
use ipteach::pomdp::{entropy_bits, Belief};
use ipteach::Error;
use rand::Rng;

fn noiseless() -> DomainConfig {
    DomainConfig {
        noise: NoiseConfig::noiseless(),
        ..DomainConfig::default()
    }
}

/// Uniform belief over concepts at the student's turn with nothing pending.
fn student_turn_belief(cfg: &DomainConfig) -> (ipteach::domain::StudentProblem, InteractiveBelief) {
    let p = build_student_ipomdp(cfg).unwrap();
    let d = &p.domain;
    let nh = d.hypotheses().len();
    let mut probs = vec![0.0; d.num_states()];
    for h in 0..nh {
        probs[d.encode(&GameState {
            concept: h,
            turn: Turn::Student,
            pending: Pending::None,
            last: Last::Idle,
        })] = 1.0 / nh as f64;
    }
    let ib = InteractiveBelief::from_physical(&Belief::new(probs).unwrap(), p.teacher_models[0].clone());
    (p, ib)
}

/// Expected concept entropy after the student acts and the teacher replies.
fn expected_entropy_after(cfg: &DomainConfig, action: StudentAction) -> f64 {
    let (p, ib) = student_turn_belief(cfg);
    let d = &p.domain;
    let nest = NestingConfig::default();
    let a = d.student_action_index(action).unwrap();
    let mut total = 0.0;
    for (_, p1, ib1) in expand_interactive(&p.model, &ib, a, &nest).unwrap() {
        for (_, p2, ib2) in expand_interactive(&p.model, &ib1, d.student_wait(), &nest).unwrap() {
            total += p1 * p2 * entropy_bits(&p.concept_belief(&ib2));
        }
    }
    total
}

#[test]
fn object_question_leaves_three_quarters_log3() {
    let h = expected_entropy_after(&noiseless(), StudentAction::AskObject { object: 0 });
    assert!((h - 0.75 * 3f64.log2()).abs() < 1e-12, "{h}");
}

#[test]
fn feature_question_leaves_one_bit_and_is_preferred() {
    let cfg = noiseless();
    let h = expected_entropy_after(&cfg, StudentAction::AskFeature { feature: 0 });
    assert!((h - 1.0).abs() < 1e-12, "{h}");
    let (p, ib) = student_turn_belief(&DomainConfig { horizon: 1, ..cfg });
    let plan = solve_level_k(&p.model, &ib, &p.plan, &p.nesting).unwrap();
    let d = &p.domain;
    let q = |a| plan.q_values[d.student_action_index(a).unwrap()];
    assert!(q(StudentAction::AskFeature { feature: 0 }) > q(StudentAction::AskObject { object: 0 }));
}

#[test]
fn single_hypothesis_declares_at_once() {
    let cfg = DomainConfig {
        hypothesis_space: vec![Concept::ALL[2]],
        ..DomainConfig::default()
    };
    let mut ep = Episode::from_config(&cfg, 0).unwrap();
    assert_eq!(ep.trace().header.initial_entropy_bits, 0.0);
    ep.teacher_step(None, Channel::Noisy).unwrap();
    let rec = ep.student_step(None).unwrap();
    assert_eq!(rec.action, "declare");
    assert_eq!(rec.declared.as_deref(), Some("blue-ball"));
}

fn random_config<R: Rng>(r: &mut R) -> DomainConfig {
    let eps = |r: &mut R| r.gen_range(0.0..0.5);
    DomainConfig {
        n_objects: r.gen_range(4..=7),
        noise: NoiseConfig {
            epsilon_speak: eps(r),
            epsilon_hear: eps(r),
            epsilon_point: eps(r),
            epsilon_answer: eps(r),
        },
        follow_up_point: r.gen_range(0.0..=1.0),
        teacher_level: r.gen_range(0..=1),
        ..DomainConfig::default()
    }
}

#[test]
fn every_table_is_stochastic_for_random_configs() {
    let mut r = rng(41);
    for _ in 0..100 {
        let cfg = random_config(&mut r);
        for row in signal_observation_model(&cfg).unwrap() {
            let s: f64 = row.iter().map(|(_, p)| p).sum();
            assert!((s - 1.0).abs() <= 1e-9);
        }
        let AgentModel::Level0(policy) = level0_teacher_policy(&cfg).unwrap() else {
            panic!("level-0 policy expected")
        };
        for row in policy.rows() {
            let s: f64 = row.iter().map(|(_, p)| p).sum();
            assert!((s - 1.0).abs() <= 1e-9);
        }
        let p = build_student_ipomdp(&cfg).unwrap();
        p.model.validate().unwrap();
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        DomainConfig {
            noise: NoiseConfig {
                epsilon_hear: 0.5,
                ..NoiseConfig::default()
            },
            ..DomainConfig::default()
        },
        DomainConfig {
            hypothesis_space: vec![],
            ..DomainConfig::default()
        },
        DomainConfig {
            n_objects: 2,
            ..DomainConfig::default()
        },
        DomainConfig {
            teacher_level: 2,
            ..DomainConfig::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(build_student_ipomdp(&cfg), Err(Error::InvalidConfig(_))), "{cfg:?}");
    }
}

#[test]
fn relabeling_hypotheses_permutes_beliefs() {
    let base = DomainConfig {
        true_concept: Some(1),
        max_steps: 8,
        horizon: 1,
        ..DomainConfig::default()
    };
    let mut swapped = base.clone();
    swapped.hypothesis_space.swap(0, 1);
    swapped.true_concept = Some(0);
    let a = ipteach::harness::run_episode(&base, 3).unwrap();
    let b = ipteach::harness::run_episode(&swapped, 3).unwrap();
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert_eq!(x.action, y.action);
        assert!((x.belief[0] - y.belief[1]).abs() < 1e-12);
        assert!((x.belief[1] - y.belief[0]).abs() < 1e-12);
        assert!((x.entropy_bits - y.entropy_bits).abs() < 1e-12);
    }
}

#[test]
fn config_json_roundtrip_and_hash() {
    let mut r = rng(42);
    for _ in 0..20 {
        let cfg = random_config(&mut r);
        let text = serde_json::to_string(&cfg).unwrap();
        let back = DomainConfig::from_json_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.config_hash(), cfg.config_hash());
    }
    assert_ne!(DomainConfig::default().config_hash(), noiseless().config_hash());
}

#[test]
fn concept_belief_of_the_initial_problem_is_the_prior() {
    let cfg = DomainConfig {
        prior: Some(vec![0.1, 0.2, 0.3, 0.4]),
        ..DomainConfig::default()
    };
    let p = Arc::new(build_student_ipomdp(&cfg).unwrap());
    let got = p.concept_belief(&p.initial);
    for (g, w) in got.iter().zip([0.1, 0.2, 0.3, 0.4]) {
        assert!((g - w).abs() < 1e-12);
    }
}
