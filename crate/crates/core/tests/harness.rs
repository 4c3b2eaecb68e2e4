use std::path::PathBuf;

use ipteach::domain::{scenario_library, DomainConfig, NoiseConfig, TeacherSignal};
use ipteach::harness::metrics::{aggregate, read_rows_csv, write_rows_csv};
use ipteach::harness::trace::{Actor, StepRecord, TraceHeader, TRACE_FORMAT};
use ipteach::harness::{
    compute_metrics, run_batch, run_episode, run_scenario, BatchMetrics, Channel, Episode, EpisodeTrace,
};
use ipteach::pomdp::entropy_bits;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `text` with the committed golden file; `UPDATE_GOLDEN=1`
/// rewrites it instead.
fn check_golden(name: &str, text: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, text).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(want == text, "{name} differs from its golden trace");
}

#[test]
fn scenario_traces_match_goldens() {
    for scn in scenario_library() {
        let trace = run_scenario(&scn).unwrap().trace;
        check_golden(&format!("{}.jsonl", scn.name), &trace.to_jsonl());
    }
}

#[test]
fn default_episode_matches_golden() {
    let trace = run_episode(&DomainConfig::default(), 42).unwrap();
    check_golden("default_seed42.jsonl", &trace.to_jsonl());
}

#[test]
fn fixed_seed_is_byte_identical() {
    let cfg = DomainConfig::default();
    assert_eq!(
        run_episode(&cfg, 42).unwrap().to_jsonl(),
        run_episode(&cfg, 42).unwrap().to_jsonl()
    );
    assert_ne!(
        run_episode(&cfg, 42).unwrap().to_jsonl(),
        run_episode(&cfg, 43).unwrap().to_jsonl()
    );
}

#[test]
fn trace_header_carries_config_hash() {
    let cfg = DomainConfig {
        horizon: 1,
        ..DomainConfig::default()
    };
    let trace = run_episode(&cfg, 1).unwrap();
    assert_eq!(trace.header.config_hash, cfg.config_hash());
    assert_eq!(trace.header.format, TRACE_FORMAT);
    assert_eq!(trace.steps.len(), cfg.max_steps);
    assert_eq!(compute_metrics(&trace).entropy_curve.len(), cfg.max_steps + 1);
}

#[test]
fn trace_jsonl_roundtrip() {
    let trace = run_episode(&DomainConfig::default(), 5).unwrap();
    let text = trace.to_jsonl();
    let back = EpisodeTrace::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(back, trace);
    assert_eq!(back.to_jsonl(), text);
}

#[test]
fn malformed_traces_are_rejected() {
    let trace = run_episode(&DomainConfig::default(), 5).unwrap();
    let wrong_format = trace.to_jsonl().replacen("trace/1", "trace/9", 1);
    assert!(EpisodeTrace::read_jsonl(wrong_format.as_bytes()).is_err());
    let mut gap = trace.clone();
    gap.steps.remove(2);
    assert!(EpisodeTrace::read_jsonl(gap.to_jsonl().as_bytes()).is_err());
    assert!(EpisodeTrace::read_jsonl("".as_bytes()).is_err());
}

#[test]
fn noiseless_identifying_point_reaches_threshold_in_one_turn() {
    let cfg = DomainConfig {
        noise: NoiseConfig::noiseless(),
        true_concept: Some(3),
        ..DomainConfig::default()
    };
    let mut ep = Episode::from_config(&cfg, 0).unwrap();
    ep.teacher_step(Some(TeacherSignal::Point { object: 3 }), Channel::Clean)
        .unwrap();
    let m = compute_metrics(ep.trace());
    assert_eq!(m.time_to_threshold, Some(1));
    assert_eq!(m.final_entropy_bits, 0.0);
    assert_eq!(m.declare_accuracy, 1.0);
}

fn step(i: usize, actor: Actor, action: &str, belief: Vec<f64>) -> StepRecord {
    StepRecord {
        step: i,
        actor,
        action: action.into(),
        declared: None,
        true_state: "x".into(),
        observation: "y".into(),
        entropy_bits: entropy_bits(&belief),
        belief,
        nested: None,
        q_values: None,
    }
}

fn hand_trace(initial: Vec<f64>, steps: Vec<StepRecord>) -> EpisodeTrace {
    EpisodeTrace {
        header: TraceHeader {
            format: TRACE_FORMAT.into(),
            config_hash: "h".into(),
            seed: 0,
            true_concept: "b".into(),
            hypotheses: vec!["a".into(), "b".into()],
            initial_entropy_bits: entropy_bits(&initial),
            initial_belief: initial,
        },
        steps,
    }
}

#[test]
fn delta_from_the_start_is_time_zero() {
    let t = hand_trace(vec![0.0, 1.0], vec![step(0, Actor::Teacher, "wait", vec![0.0, 1.0])]);
    let m = compute_metrics(&t);
    assert_eq!(m.time_to_threshold, Some(0));
    assert_eq!(m.questions_to_threshold, Some(0));
    assert_eq!(m.entropy_curve, vec![0.0, 0.0]);
}

#[test]
fn hand_built_three_step_trace() {
    let t = hand_trace(
        vec![0.5, 0.5],
        vec![
            step(0, Actor::Teacher, "utter:red", vec![0.3, 0.7]),
            step(1, Actor::Student, "ask_feature:red", vec![0.3, 0.7]),
            step(2, Actor::Teacher, "answer:no", vec![0.02, 0.98]),
        ],
    );
    let m = compute_metrics(&t);
    assert_eq!(m.time_to_threshold, Some(3));
    assert_eq!(m.questions_to_threshold, Some(1));
    assert_eq!(m.declare_accuracy, 1.0);
    assert_eq!(m.entropy_curve[0], 1.0);
    assert!((m.final_entropy_bits - 0.14144054254182067).abs() < 1e-12);
    let never = hand_trace(vec![0.5, 0.5], vec![step(0, Actor::Teacher, "wait", vec![0.6, 0.4])]);
    let m = compute_metrics(&never);
    assert_eq!(m.time_to_threshold, None);
    assert_eq!(m.declare_accuracy, 0.0);
    let agg = aggregate(&[(0, m)], 1).unwrap();
    assert_eq!(agg.metrics.mean_time_to_threshold, 2.0);
    assert_eq!(agg.metrics.reached_fraction, 0.0);
}

#[test]
fn single_seed_batch_equals_its_trace() {
    let cfg = DomainConfig {
        horizon: 1,
        ..DomainConfig::default()
    };
    let batch = run_batch(&cfg, 1).unwrap();
    let m = compute_metrics(&run_episode(&cfg, 0).unwrap());
    assert_eq!(batch.metrics.mean_entropy_curve, m.entropy_curve);
    assert_eq!(batch.metrics.mean_final_entropy_bits, m.final_entropy_bits);
    assert_eq!(batch.rows[0].time_to_threshold, m.time_to_threshold);
    assert_eq!(batch.metrics.declare_accuracy, m.declare_accuracy);
}

#[test]
fn noiseless_batch_is_always_right() {
    let cfg = DomainConfig {
        noise: NoiseConfig::noiseless(),
        ..DomainConfig::default()
    };
    let batch = run_batch(&cfg, 20).unwrap();
    assert_eq!(batch.metrics.declare_accuracy, 1.0);
    assert_eq!(batch.metrics.reached_fraction, 1.0);
}

#[test]
fn zero_seeds_is_an_error() {
    assert!(run_batch(&DomainConfig::default(), 0).is_err());
}

#[test]
fn csv_and_json_roundtrips() {
    let batch = run_batch(&DomainConfig::default(), 6).unwrap();
    let mut buf = Vec::new();
    write_rows_csv(&batch.rows, &mut buf).unwrap();
    assert_eq!(read_rows_csv(buf.as_slice()).unwrap(), batch.rows);
    let json = serde_json::to_string(&batch.metrics).unwrap();
    assert_eq!(serde_json::from_str::<BatchMetrics>(&json).unwrap(), batch.metrics);
    let m = compute_metrics(&run_episode(&DomainConfig::default(), 2).unwrap());
    let json = serde_json::to_string(&m).unwrap();
    assert_eq!(serde_json::from_str::<ipteach::harness::Metrics>(&json).unwrap(), m);
}
