use std::path::{Path, PathBuf};

use ipteach::domain::{scenario_library, DomainConfig};
use ipteach::harness::fixtures::two_door;
use ipteach::harness::{run_episode, EpisodeTrace};
use ipteach_cli::commands::{self, Document};
use serde_json::Value;
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run<F: FnOnce(&mut Vec<u8>) -> anyhow::Result<()>>(f: F) -> Value {
    let mut out = Vec::new();
    f(&mut out).unwrap();
    serde_json::from_slice(&out).unwrap()
}

fn door_file(dir: &TempDir) -> PathBuf {
    write(dir, "door.json", &two_door(0.9).to_json().to_string())
}

#[test]
fn validate_summarizes_each_document_kind() {
    let dir = TempDir::new().unwrap();
    let door = door_file(&dir);
    let v = run(|o| commands::validate(&door, o));
    assert_eq!(v["valid"], true);
    assert_eq!(v["summary"]["states"], 4);

    let cfg = write(&dir, "cfg.json", "{}");
    let v = run(|o| commands::validate(&cfg, o));
    assert_eq!(v["summary"]["states"], 616);
    assert_eq!(v["summary"]["config_hash"], DomainConfig::default().config_hash());

    let scn = &scenario_library()[0];
    let scn_path = write(&dir, "scn.json", &serde_json::to_string(scn).unwrap());
    let v = run(|o| commands::validate(&scn_path, o));
    assert_eq!(v["summary"]["scenario"], scn.name.as_str());
}

#[test]
fn invalid_documents_are_rejected() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"n_objects": 0}"#);
    assert!(commands::validate(&bad, &mut Vec::new()).is_err());
    let junk = write(&dir, "junk.json", "{");
    assert!(commands::validate(&junk, &mut Vec::new()).is_err());
    assert!(commands::validate(Path::new("/nonexistent/x.json"), &mut Vec::new()).is_err());
    assert!(matches!(commands::parse_document("{}").unwrap(), Document::Domain(_)));
}

#[test]
fn plan_agrees_with_oracle_on_a_pomdp() {
    let dir = TempDir::new().unwrap();
    let door = door_file(&dir);
    let belief = "0.5,0,0.5,0";
    for h in 1..=3 {
        let p = run(|o| commands::plan(&door, Some(belief), h, None, 0, o));
        let q = run(|o| commands::oracle(&door, Some(belief), h, o));
        assert_eq!(p["chosen_action"], q["chosen_action"]);
        assert_eq!(p["chosen_label"], "listen-good");
        let pq: Vec<f64> = serde_json::from_value(p["q_values"].clone()).unwrap();
        let oq: Vec<f64> = serde_json::from_value(q["q_values"].clone()).unwrap();
        for (a, b) in pq.iter().zip(&oq) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
    assert!(commands::plan(&door, None, 1, None, 0, &mut Vec::new()).is_err());
    assert!(commands::plan(&door, Some("0.5,0.5"), 1, None, 0, &mut Vec::new()).is_err());
    assert!(commands::parse_belief("0.5,x").is_err());
}

#[test]
fn plan_on_an_interactive_document() {
    let dir = TempDir::new().unwrap();
    let p = ipteach::domain::build_student_ipomdp(&DomainConfig::default())
        .unwrap()
        .to_interactive();
    let path = write(&dir, "ip.json", &p.to_json().unwrap().to_string());
    let v = run(|o| commands::plan(&path, None, 1, None, 0, o));
    assert!(v["chosen_label"].is_string());
    assert!(commands::plan(&path, Some("1"), 1, None, 0, &mut Vec::new()).is_err());
}

#[test]
fn simulate_matches_the_library_and_writes_jsonl() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", "{}");
    let trace = commands::simulate(&cfg, 5).unwrap();
    assert_eq!(trace, run_episode(&DomainConfig::default(), 5).unwrap());
    let out = dir.path().join("t.jsonl");
    commands::write_trace(&trace, Some(&out), &mut Vec::new()).unwrap();
    let back = EpisodeTrace::read_jsonl(std::fs::read(&out).unwrap().as_slice()).unwrap();
    assert_eq!(back, trace);
    let mut stdout = Vec::new();
    commands::write_trace(&trace, None, &mut stdout).unwrap();
    assert_eq!(stdout, std::fs::read(&out).unwrap());
}

#[test]
fn batch_writes_one_csv_row_per_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"max_steps": 6}"#);
    let csv = dir.path().join("rows.csv");
    let v = run(|o| commands::batch(&cfg, 3, &csv, o));
    assert!(v.is_object());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
}
