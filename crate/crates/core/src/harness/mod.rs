//! Simulation harness: seeded episodes, batches, metrics, traces, scripted
//! scenarios and the brute-force oracle.

pub mod agent;
pub mod episode;
pub mod fixtures;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod trace;
pub mod tracking;

use std::sync::Arc;

use crate::domain::{build_student_ipomdp, Scenario, ScriptStep, StudentAction, StudentProblem};
use crate::error::{Error, Result};

pub use agent::StudentAgent;
pub use episode::{run_episode, run_episode_with, Channel, Episode};
pub use metrics::{compute_metrics, run_batch, run_batch_with, BatchMetrics, BatchResult, Metrics, SeedRow};
pub use trace::{EpisodeTrace, StepRecord};

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub chosen: StudentAction,
    pub q_values: Vec<f64>,
    pub trace: EpisodeTrace,
}

/// Plays a scenario script through the engine. The outcome is the last
/// planning step's choice.
pub fn run_scenario(scn: &Scenario) -> Result<ScenarioOutcome> {
    let problem = Arc::new(build_student_ipomdp(&scn.config)?);
    let mut ep = Episode::new(problem, scn.config.seed)?;
    let mut last = None;
    for step in &scn.script {
        match step {
            ScriptStep::Teacher { signal } => {
                ep.teacher_step(Some(*signal), Channel::Clean)?;
            }
            ScriptStep::Student { action } => {
                ep.student_step(Some(*action))?;
            }
            ScriptStep::Plan => {
                let rec = ep.student_step(None)?;
                last = Some(rec.q_values.clone().expect("planned step has q-values"));
            }
        }
    }
    let q_values = last.ok_or_else(|| Error::InvalidConfig("script never plans".into()))?;
    let domain = ep.agent().domain().clone();
    let chosen = domain.student_action(
        crate::planner::argmax_lowest(&q_values).ok_or(Error::NoActions)?,
    );
    Ok(ScenarioOutcome {
        chosen,
        q_values,
        trace: ep.into_trace(),
    })
}

/// Replays a scenario with the oracle's own nested update and returns its
/// Q-values at the final planning step.
pub fn oracle_scenario(scn: &Scenario) -> Result<Vec<f64>> {
    let problem: StudentProblem = build_student_ipomdp(&scn.config)?;
    let d = &problem.domain;
    let jm = &problem.model;
    let mut b = oracle::ref_belief(&problem.initial)?;
    let mut out = None;
    for (i, step) in scn.script.iter().enumerate() {
        let (a_i, o_i) = match step {
            ScriptStep::Teacher { signal } => (
                d.student_wait(),
                d.observation_index(d.clean_observation(*signal))?,
            ),
            ScriptStep::Student { action } => (
                d.student_action_index(*action)?,
                d.observation_index(crate::domain::StudentObservation::Silence)?,
            ),
            ScriptStep::Plan => {
                let q = oracle::brute_force_joint_ref(jm, &b, problem.plan.horizon)?;
                let a = oracle::chosen(&q).ok_or(Error::NoActions)?;
                if i + 1 == scn.script.len() {
                    out = Some(q);
                    break;
                }
                (a, d.observation_index(crate::domain::StudentObservation::Silence)?)
            }
        };
        b = oracle::enumerate_interactive_update(jm, &b, a_i, o_i, 0.0, 0.0)?;
    }
    out.ok_or_else(|| Error::InvalidConfig("script never plans".into()))
}
