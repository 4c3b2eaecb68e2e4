mod common;

use std::sync::Arc;

use common::{max_abs_diff, random_belief, random_joint, rng};
use ipteach::domain::{
    build_student_ipomdp, DomainConfig, GameState, Last, NoiseConfig, Pending, StudentAction,
    TeacherSignal, Turn,
};
use ipteach::harness::oracle::{enumerate_interactive_update, max_discrepancy, ref_belief};
use ipteach::harness::{Channel, Episode};
use ipteach::nesting::{
    interactive_belief_update, solve_level_k, teacher_action_distribution, AgentModel,
    InteractiveBelief, InteractiveProblem, Level0Policy, NestedBelief, NestingConfig,
};
use ipteach::planner::{select_action, PlanConfig};
use rand::Rng;

fn delta_policy(ns: usize, nb: usize, b: usize) -> Arc<Level0Policy> {
    Arc::new(Level0Policy::new(vec![vec![(b, 1.0)]; ns], nb).unwrap())
}

#[test]
fn deterministic_teacher_reduces_to_flat_update() {
    let mut r = rng(31);
    let cfg = NestingConfig::default();
    for _ in 0..200 {
        let jm = random_joint(&mut r, 3, false);
        let b_fixed = r.gen_range(0..jm.other_actions().len());
        let policy = delta_policy(jm.num_states(), jm.other_actions().len(), b_fixed);
        let flat = jm.reduce_with_policy(&policy).unwrap();
        let b = random_belief(&mut r, jm.num_states());
        let ib = InteractiveBelief::from_physical(&b, Arc::new(AgentModel::Level0(policy)));
        let a = r.gen_range(0..jm.own_actions().len());
        for o in 0..jm.own_observations().len() {
            match (interactive_belief_update(&jm, &ib, a, o, &cfg), flat.belief_update(&b, a, o)) {
                (Ok(nested), Ok(expect)) => {
                    let got = nested.physical_marginal(jm.num_states());
                    assert!(max_abs_diff(&got, expect.probs()) <= 1e-12);
                }
                (Err(_), Err(_)) => {}
                (x, y) => panic!("nested {x:?} vs flat {y:?}"),
            }
        }
    }
}

#[test]
fn random_joint_updates_match_enumeration() {
    let mut r = rng(32);
    let cfg = NestingConfig::default();
    for _ in 0..200 {
        let jm = random_joint(&mut r, 3, false);
        let nb = jm.other_actions().len();
        let rows = (0..jm.num_states())
            .map(|_| common::random_dist(&mut r, nb).iter().cloned().enumerate().filter(|x| x.1 > 0.0).collect())
            .collect();
        let policy = Arc::new(Level0Policy::new(rows, nb).unwrap());
        let b = random_belief(&mut r, jm.num_states());
        let ib = InteractiveBelief::from_physical(&b, Arc::new(AgentModel::Level0(policy)));
        let reference = ref_belief(&ib).unwrap();
        let a = r.gen_range(0..jm.own_actions().len());
        for o in 0..jm.own_observations().len() {
            let got = interactive_belief_update(&jm, &ib, a, o, &cfg);
            let want = enumerate_interactive_update(&jm, &reference, a, o, cfg.prune_epsilon, cfg.merge_l1);
            match (got, want) {
                (Ok(g), Ok(w)) => assert!(max_discrepancy(&g, &w, 1e-9).unwrap() <= 1e-9),
                (Err(_), Err(_)) => {}
                (x, y) => panic!("engine {x:?} vs reference {y:?}"),
            }
        }
    }
}

/// Random student actions against the simulated teacher; after every step
/// the engine belief is compared with the oracle's enumeration.
fn objects_game_walk(teacher_level: usize, seed: u64, steps: usize) -> f64 {
    let cfg = DomainConfig {
        teacher_level,
        horizon: 1,
        ..DomainConfig::default()
    };
    let problem = Arc::new(build_student_ipomdp(&cfg).unwrap());
    let d = problem.domain.clone();
    let jm = problem.model.clone();
    let nest = problem.nesting;
    let mut ep = Episode::new(problem.clone(), seed).unwrap();
    let mut reference = ref_belief(&problem.initial).unwrap();
    let mut r = rng(seed ^ 0xabc);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        match ep.turn() {
            Turn::Teacher => {
                ep.teacher_step(None, Channel::Noisy).unwrap();
            }
            Turn::Student => {
                let a = d.student_action(r.gen_range(0..d.num_student_actions()));
                ep.student_step(Some(a)).unwrap();
            }
        }
        let (a, o) = ep.last_view().unwrap();
        reference =
            enumerate_interactive_update(&jm, &reference, a, o, nest.prune_epsilon, nest.merge_l1).unwrap();
        worst = worst.max(max_discrepancy(ep.agent().belief(), &reference, 1e-9).unwrap());
    }
    worst
}

#[test]
fn objects_game_level0_teacher_matches_enumeration() {
    for seed in 0..20 {
        assert!(objects_game_walk(0, seed, 10) <= 1e-9, "seed {seed}");
    }
}

#[test]
fn objects_game_level1_teacher_matches_enumeration() {
    for seed in 0..20 {
        assert!(objects_game_walk(1, seed, 10) <= 1e-9, "seed {seed}");
    }
}

#[test]
fn waiting_teacher_collapses_to_single_agent_planning() {
    let mut r = rng(33);
    for _ in 0..50 {
        let jm = random_joint(&mut r, 3, true);
        let policy = delta_policy(jm.num_states(), jm.other_actions().len(), 0);
        let flat = jm.reduce_with_policy(&policy).unwrap();
        let b = random_belief(&mut r, jm.num_states());
        let ib = InteractiveBelief::from_physical(&b, Arc::new(AgentModel::Level0(policy)));
        let cfg = PlanConfig::with_horizon(2);
        let nested = solve_level_k(&jm, &ib, &cfg, &NestingConfig::default()).unwrap();
        let single = select_action(&flat, &b, &cfg).unwrap();
        assert_eq!(nested.chosen_action, single.chosen_action);
        assert!(max_abs_diff(&nested.q_values, &single.q_values) <= 1e-12);
    }
}

#[test]
fn level1_teacher_answers_a_pending_question() {
    let cfg = DomainConfig {
        teacher_level: 1,
        noise: NoiseConfig::noiseless(),
        ..DomainConfig::default()
    };
    let p = build_student_ipomdp(&cfg).unwrap();
    let d = &p.domain;
    for (h, concept) in d.hypotheses().iter().enumerate() {
        for feature in 0..4 {
            let s = d.encode(&GameState {
                concept: h,
                turn: Turn::Teacher,
                pending: Pending::Feature { feature },
                last: Last::Idle,
            });
            let AgentModel::LevelK(m) = &*p.teacher_models[h] else {
                panic!("level-1 teacher expected")
            };
            let NestedBelief::Flat { grounding, .. } = &m.belief else {
                panic!("flat teacher belief expected")
            };
            let mut asked = m.clone();
            asked.belief = NestedBelief::Flat {
                belief: ipteach::pomdp::Belief::delta(d.num_states(), s),
                grounding: grounding.clone(),
            };
            let dist = teacher_action_distribution(
                &AgentModel::LevelK(asked),
                &[(s, 1.0)],
                &p.model.other_available(s),
                d.num_teacher_actions(),
                3,
            )
            .unwrap();
            let truthful = d
                .teacher_signal_index(TeacherSignal::Answer {
                    yes: concept.has(feature),
                })
                .unwrap();
            let mut expect = vec![0.0; d.num_teacher_actions()];
            expect[truthful] = 1.0;
            assert_eq!(dist, expect, "concept {} feature {feature}", concept.label());
        }
    }
}

#[test]
fn interactive_problem_json_roundtrip() {
    for level in [0, 1] {
        let cfg = DomainConfig {
            teacher_level: level,
            ..DomainConfig::default()
        };
        let p = build_student_ipomdp(&cfg).unwrap().to_interactive();
        let text = serde_json::to_string(&p.to_json().unwrap()).unwrap();
        let back = InteractiveProblem::from_json_str(&text).unwrap();
        assert_eq!(back.model, p.model);
        assert!(back.initial.equivalent(&p.initial, 0.0));
        assert_eq!(back.nesting, p.nesting);
    }
}

#[test]
fn clarify_is_the_planned_move_under_noisy_hearing() {
    let scn = ipteach::domain::scenario_library()
        .into_iter()
        .find(|s| s.name == "clarification")
        .unwrap();
    let out = ipteach::harness::run_scenario(&scn).unwrap();
    assert_eq!(out.chosen, StudentAction::AskClarify);
}
