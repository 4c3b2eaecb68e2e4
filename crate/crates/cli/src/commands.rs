//! Subcommand implementations. Data goes to the given writer; diagnostics
//! go through `log`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ipteach::domain::{build_student_ipomdp, DomainConfig, Scenario};
use ipteach::harness::metrics::write_rows_csv;
use ipteach::harness::oracle::{brute_force_expectimax, brute_force_joint};
use ipteach::harness::{run_batch, run_episode, run_scenario, EpisodeTrace};
use ipteach::nesting::{solve_level_k, InteractiveProblem};
use ipteach::planner::{select_action, PlanConfig};
use ipteach::pomdp::{Belief, PomdpModel, POMDP_FORMAT};
use serde_json::{json, Value};

/// A parsed input document.
pub enum Document {
    Pomdp(PomdpModel),
    Interactive(InteractiveProblem),
    Domain(DomainConfig),
    Scenario(Scenario),
}

pub fn load(path: &Path) -> Result<Document> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_document(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_document(text: &str) -> Result<Document> {
    let value: Value = serde_json::from_str(text)?;
    if value.get("script").is_some() {
        let scn: Scenario = serde_json::from_value(value)?;
        scn.config.validate()?;
        return Ok(Document::Scenario(scn));
    }
    match value.get("format").and_then(Value::as_str) {
        Some(POMDP_FORMAT) => Ok(Document::Pomdp(PomdpModel::from_json_str(text)?)),
        Some(ipteach::nesting::IPOMDP_FORMAT) => {
            Ok(Document::Interactive(InteractiveProblem::from_json_str(text)?))
        }
        _ => Ok(Document::Domain(DomainConfig::from_json_str(text)?)),
    }
}

pub fn parse_belief(csv: &str) -> Result<Belief> {
    let probs = csv
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad probability {x:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Belief::new(probs)?)
}

fn emit<W: Write>(out: &mut W, v: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

pub fn validate<W: Write>(path: &Path, out: &mut W) -> Result<()> {
    let summary = match load(path)? {
        Document::Pomdp(m) => json!({
            "format": POMDP_FORMAT,
            "states": m.num_states(),
            "actions": m.num_actions(),
            "observations": m.num_observations(),
        }),
        Document::Interactive(p) => json!({
            "format": ipteach::nesting::IPOMDP_FORMAT,
            "states": p.model.num_states(),
            "own_actions": p.model.own_actions().len(),
            "other_actions": p.model.other_actions().len(),
            "branches": p.initial.len(),
        }),
        Document::Domain(cfg) => {
            let p = build_student_ipomdp(&cfg)?;
            json!({
                "format": cfg.format,
                "states": p.domain.num_states(),
                "student_actions": p.domain.num_student_actions(),
                "teacher_actions": p.domain.num_teacher_actions(),
                "config_hash": cfg.config_hash(),
            })
        }
        Document::Scenario(s) => {
            build_student_ipomdp(&s.config)?;
            json!({ "scenario": s.name, "steps": s.script.len() })
        }
    };
    emit(out, &json!({ "valid": true, "summary": summary }))
}

pub fn plan<W: Write>(
    path: &Path,
    belief: Option<&str>,
    horizon: usize,
    cap: Option<usize>,
    seed: u64,
    out: &mut W,
) -> Result<()> {
    let cfg = PlanConfig {
        observation_branch_cap: cap,
        seed,
        ..PlanConfig::with_horizon(horizon)
    };
    let (result, labels) = match load(path)? {
        Document::Pomdp(m) => {
            let b = parse_belief(belief.context("--belief is required for pomdp/1 models")?)?;
            (select_action(&m, &b, &cfg)?, m.actions().to_vec())
        }
        Document::Interactive(p) => {
            if belief.is_some() {
                bail!("ipomdp/1 documents carry their own initial belief; drop --belief");
            }
            (
                solve_level_k(&p.model, &p.initial, &cfg, &p.nesting)?,
                p.model.own_actions().to_vec(),
            )
        }
        _ => bail!("plan expects a pomdp/1 or ipomdp/1 model"),
    };
    emit(
        out,
        &json!({
            "chosen_action": result.chosen_action,
            "chosen_label": labels[result.chosen_action],
            "q_values": result.q_values,
            "nodes_expanded": result.nodes_expanded,
            "branches_pruned": result.branches_pruned,
        }),
    )
}

pub fn oracle<W: Write>(path: &Path, belief: Option<&str>, horizon: usize, out: &mut W) -> Result<()> {
    let q = match load(path)? {
        Document::Pomdp(m) => {
            let b = parse_belief(belief.context("--belief is required for pomdp/1 models")?)?;
            brute_force_expectimax(&m, &b, horizon)?
        }
        Document::Interactive(p) => {
            if belief.is_some() {
                bail!("ipomdp/1 documents carry their own initial belief; drop --belief");
            }
            brute_force_joint(&p.model, &p.initial, horizon)?
        }
        _ => bail!("oracle expects a pomdp/1 or ipomdp/1 model"),
    };
    let chosen = ipteach::harness::oracle::chosen(&q);
    emit(out, &json!({ "chosen_action": chosen, "q_values": q }))
}

pub fn simulate(path: &Path, seed: u64) -> Result<EpisodeTrace> {
    match load(path)? {
        Document::Domain(cfg) => Ok(run_episode(&cfg, seed)?),
        Document::Scenario(mut scn) => {
            scn.config.seed = seed;
            let outcome = run_scenario(&scn)?;
            log::info!("scenario {} chose {:?}", scn.name, outcome.chosen);
            Ok(outcome.trace)
        }
        _ => bail!("simulate expects a domain config or a scenario"),
    }
}

pub fn write_trace<W: Write>(trace: &EpisodeTrace, target: Option<&Path>, stdout: &mut W) -> Result<()> {
    match target {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            trace.write_jsonl(&mut w)?;
            w.flush()?;
        }
        None => trace.write_jsonl(stdout)?,
    }
    Ok(())
}

pub fn batch<W: Write>(path: &Path, seeds: u64, csv_out: &Path, out: &mut W) -> Result<()> {
    let cfg = match load(path)? {
        Document::Domain(cfg) => cfg,
        Document::Scenario(scn) => scn.config,
        _ => bail!("batch expects a domain config or a scenario"),
    };
    let result = run_batch(&cfg, seeds)?;
    let file = File::create(csv_out).with_context(|| format!("creating {}", csv_out.display()))?;
    write_rows_csv(&result.rows, BufWriter::new(file))?;
    emit(out, &serde_json::to_value(&result.metrics)?)
}
