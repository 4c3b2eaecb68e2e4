//! Episode traces as JSON Lines: a header line, then one record per step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_FORMAT: &str = "trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub config_hash: String,
    pub seed: u64,
    pub true_concept: String,
    pub hypotheses: Vec<String>,
    pub initial_belief: Vec<f64>,
    pub initial_entropy_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Teacher,
    Student,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub actor: Actor,
    pub action: String,
    /// Concept announced by a declare action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared: Option<String>,
    /// True physical state after the step.
    pub true_state: String,
    pub observation: String,
    /// Student posterior over the hypothesis space after the step.
    pub belief: Vec<f64>,
    pub entropy_bits: f64,
    /// Student's estimate of the level-1 teacher's belief about the pending
    /// question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
}

impl EpisodeTrace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty trace".into()))??;
        let header: TraceHeader = serde_json::from_str(&first)?;
        if header.format != TRACE_FORMAT {
            return Err(Error::Format(format!(
                "expected format {TRACE_FORMAT}, found {}",
                header.format
            )));
        }
        let mut steps = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            steps.push(serde_json::from_str(&line)?);
        }
        let trace = EpisodeTrace { header, steps };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.step != i {
                return Err(Error::Format(format!("step {} found at position {i}", s.step)));
            }
            let sum: f64 = s.belief.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || s.belief.iter().any(|&p| p < 0.0) {
                return Err(Error::Format(format!("invalid belief at step {i}")));
            }
        }
        Ok(())
    }

    /// Entropy before any step followed by the entropy after each step.
    pub fn entropy_curve(&self) -> Vec<f64> {
        std::iter::once(self.header.initial_entropy_bits)
            .chain(self.steps.iter().map(|s| s.entropy_bits))
            .collect()
    }

    pub fn belief_curve(&self) -> Vec<&[f64]> {
        std::iter::once(self.header.initial_belief.as_slice())
            .chain(self.steps.iter().map(|s| s.belief.as_slice()))
            .collect()
    }
}
