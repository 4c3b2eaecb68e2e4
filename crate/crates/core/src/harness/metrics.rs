//! Certainty-versus-time metrics for single traces and seeded batches.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{build_student_ipomdp, DomainConfig, StudentProblem};
use crate::error::{Error, Result};

use super::episode::run_episode_with;
use super::trace::{Actor, EpisodeTrace};

pub const CERTAINTY_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Index into the entropy curve (0 = before any step) at which the
    /// largest concept posterior first reaches the threshold.
    pub time_to_threshold: Option<usize>,
    pub final_entropy_bits: f64,
    /// Whether the final most probable concept is the true one.
    pub declare_accuracy: f64,
    pub entropy_curve: Vec<f64>,
    /// Student questions asked before the threshold was reached.
    pub questions_to_threshold: Option<usize>,
}

fn map_index(b: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in b.iter().enumerate() {
        if p > b[best] {
            best = i;
        }
    }
    best
}

fn is_question(action: &str) -> bool {
    action.starts_with("ask_")
}

pub fn compute_metrics(trace: &EpisodeTrace) -> Metrics {
    let beliefs = trace.belief_curve();
    let time_to_threshold = beliefs
        .iter()
        .position(|b| b.iter().cloned().fold(0.0, f64::max) >= CERTAINTY_THRESHOLD);
    let questions_to_threshold = time_to_threshold.map(|t| {
        trace.steps[..t]
            .iter()
            .filter(|s| s.actor == Actor::Student && is_question(&s.action))
            .count()
    });
    let last = beliefs.last().expect("curve has the initial point");
    let truth = trace
        .header
        .hypotheses
        .iter()
        .position(|h| *h == trace.header.true_concept);
    let entropy_curve = trace.entropy_curve();
    Metrics {
        time_to_threshold,
        final_entropy_bits: *entropy_curve.last().expect("non-empty"),
        declare_accuracy: if Some(map_index(last)) == truth { 1.0 } else { 0.0 },
        entropy_curve,
        questions_to_threshold,
    }
}

/// One row of the per-seed table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub time_to_threshold: Option<usize>,
    pub questions_to_threshold: Option<usize>,
    pub final_entropy_bits: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub n_seeds: usize,
    /// Mean time to threshold; runs that never reach it count as the
    /// episode length plus one.
    pub mean_time_to_threshold: f64,
    pub reached_fraction: f64,
    pub mean_final_entropy_bits: f64,
    pub declare_accuracy: f64,
    pub mean_entropy_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub metrics: BatchMetrics,
    pub rows: Vec<SeedRow>,
}

pub fn aggregate(per_seed: &[(u64, Metrics)], max_steps: usize) -> Result<BatchResult> {
    if per_seed.is_empty() {
        return Err(Error::InvalidConfig("batch needs at least one seed".into()));
    }
    let n = per_seed.len() as f64;
    let len = per_seed.iter().map(|(_, m)| m.entropy_curve.len()).max().unwrap_or(0);
    let mut curve = vec![0.0; len];
    for (_, m) in per_seed {
        for (c, v) in curve.iter_mut().zip(&m.entropy_curve) {
            *c += v / n;
        }
    }
    let metrics = BatchMetrics {
        n_seeds: per_seed.len(),
        mean_time_to_threshold: per_seed
            .iter()
            .map(|(_, m)| m.time_to_threshold.unwrap_or(max_steps + 1) as f64)
            .sum::<f64>()
            / n,
        reached_fraction: per_seed
            .iter()
            .filter(|(_, m)| m.time_to_threshold.is_some())
            .count() as f64
            / n,
        mean_final_entropy_bits: per_seed.iter().map(|(_, m)| m.final_entropy_bits).sum::<f64>() / n,
        declare_accuracy: per_seed.iter().map(|(_, m)| m.declare_accuracy).sum::<f64>() / n,
        mean_entropy_curve: curve,
    };
    let rows = per_seed
        .iter()
        .map(|(seed, m)| SeedRow {
            seed: *seed,
            time_to_threshold: m.time_to_threshold,
            questions_to_threshold: m.questions_to_threshold,
            final_entropy_bits: m.final_entropy_bits,
            correct: m.declare_accuracy == 1.0,
        })
        .collect();
    Ok(BatchResult { metrics, rows })
}

/// Runs seeds `0..n_seeds` in parallel and aggregates them in seed order.
pub fn run_batch(cfg: &DomainConfig, n_seeds: u64) -> Result<BatchResult> {
    let problem = Arc::new(build_student_ipomdp(cfg)?);
    run_batch_with(problem, n_seeds)
}

pub fn run_batch_with(problem: Arc<StudentProblem>, n_seeds: u64) -> Result<BatchResult> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("batch needs at least one seed".into()));
    }
    let per_seed: Vec<(u64, Metrics)> = (0..n_seeds)
        .into_par_iter()
        .map(|seed| {
            let trace = run_episode_with(problem.clone(), seed).map_err(|e| {
                log::error!("seed {seed} failed: {e}");
                Error::AtSeed {
                    seed,
                    source: Box::new(e),
                }
            })?;
            Ok((seed, compute_metrics(&trace)))
        })
        .collect::<Result<_>>()?;
    aggregate(&per_seed, problem.domain.config().max_steps)
}

pub fn write_rows_csv<W: Write>(rows: &[SeedRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: std::io::Read>(r: R) -> Result<Vec<SeedRow>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}
