//! Finite-horizon expectimax over beliefs.
//!
//! Q(b, a) = R(b) + γ Σ_o P(o | b, a) · EU(b'_{a,o}, h - 1) and
//! EU(b, h) = max_a Q(b, a), with EU(b, 0) = R(b). The reward is collected at
//! every level of the tree, not only at the leaves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{Belief, PomdpModel};

/// Relative tolerance under which two Q-values count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount_override: Option<f64>,
    /// Keep only the `k` most likely observation branches per node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_branch_cap: Option<usize>,
    /// Search order heuristic; never changes the argmax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_priority: Option<Vec<String>>,
    #[serde(default)]
    pub seed: u64,
}

impl PlanConfig {
    pub fn with_horizon(horizon: usize) -> Self {
        PlanConfig {
            horizon,
            discount_override: None,
            observation_branch_cap: None,
            action_priority: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.observation_branch_cap == Some(0) {
            return Err(Error::InvalidConfig("observation branch cap must be >= 1".into()));
        }
        if let Some(g) = self.discount_override {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidConfig(format!("discount {g} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn discount_for(&self, model_discount: f64) -> f64 {
        self.discount_override.unwrap_or(model_discount)
    }

    /// Action indices in search order: prioritized labels first, then the rest
    /// in index order.
    pub fn search_order(&self, labels: &[String]) -> Vec<usize> {
        let mut order = Vec::with_capacity(labels.len());
        if let Some(prio) = &self.action_priority {
            for name in prio {
                if let Some(i) = labels.iter().position(|l| l == name) {
                    if !order.contains(&i) {
                        order.push(i);
                    }
                }
            }
        }
        for i in 0..labels.len() {
            if !order.contains(&i) {
                order.push(i);
            }
        }
        order
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub chosen_action: usize,
    /// Q(b, a) indexed by action.
    pub q_values: Vec<f64>,
    pub nodes_expanded: u64,
    pub branches_pruned: u64,
}

impl PlanResult {
    /// Builds a result from Q-values using the lowest-index tie-break.
    pub fn from_q(q_values: Vec<f64>, nodes_expanded: u64, branches_pruned: u64) -> Result<Self> {
        let chosen_action = argmax_lowest(&q_values).ok_or(Error::NoActions)?;
        Ok(PlanResult {
            chosen_action,
            q_values,
            nodes_expanded,
            branches_pruned,
        })
    }
}

fn tie_threshold(max: f64) -> f64 {
    max - TIE_TOL * max.abs().max(1.0)
}

/// Lowest index whose value is tied with the maximum. Non-finite entries
/// (unavailable actions) are skipped.
pub fn argmax_lowest(values: &[f64]) -> Option<usize> {
    let max = values
        .iter()
        .cloned()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let thr = tie_threshold(max);
    values.iter().position(|&v| v >= thr)
}

/// Every index tied with the maximum.
pub fn argmax_set(values: &[f64]) -> Vec<usize> {
    let max = values
        .iter()
        .cloned()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Vec::new();
    }
    let thr = tie_threshold(max);
    (0..values.len()).filter(|&i| values[i] >= thr).collect()
}

/// Keeps the `cap` most likely branches (stable on ties) and renormalizes
/// their weights. Returns the number of dropped branches.
pub fn cap_branches<T>(branches: &mut Vec<(f64, T)>, cap: Option<usize>) -> u64 {
    let Some(cap) = cap else { return 0 };
    if branches.len() <= cap {
        return 0;
    }
    let mut idx: Vec<usize> = (0..branches.len()).collect();
    idx.sort_by(|&a, &b| branches[b].0.total_cmp(&branches[a].0).then(a.cmp(&b)));
    let mut keep = vec![false; branches.len()];
    for &i in &idx[..cap] {
        keep[i] = true;
    }
    let dropped = (branches.len() - cap) as u64;
    let mut i = 0;
    branches.retain(|_| {
        let k = keep[i];
        i += 1;
        k
    });
    let total: f64 = branches.iter().map(|(p, _)| *p).sum();
    for (p, _) in branches.iter_mut() {
        *p /= total;
    }
    dropped
}

#[derive(Default, Clone, Copy)]
struct Stats {
    nodes: u64,
    pruned: u64,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.nodes += o.nodes;
        self.pruned += o.pruned;
    }
}

struct Search<'a> {
    model: &'a PomdpModel,
    gamma: f64,
    cap: Option<usize>,
    order: Vec<usize>,
}

impl Search<'_> {
    fn value(&self, b: &Belief, steps: usize, stats: &mut Stats) -> Result<f64> {
        if steps == 0 {
            return self.model.utility_eval(b);
        }
        let mut best = f64::NEG_INFINITY;
        for &a in &self.order {
            best = best.max(self.q(b, a, steps, stats)?);
        }
        Ok(best)
    }

    fn q(&self, b: &Belief, a: usize, steps: usize, stats: &mut Stats) -> Result<f64> {
        let r = self.model.utility_eval(b)?;
        let mut branches: Vec<(f64, Belief)> = self
            .model
            .expand(b, a)?
            .into_iter()
            .map(|(_, p, post)| (p, post))
            .collect();
        stats.pruned += cap_branches(&mut branches, self.cap);
        let mut future = 0.0;
        for (p, post) in &branches {
            stats.nodes += 1;
            future += p * self.value(post, steps - 1, stats)?;
        }
        Ok(r + self.gamma * future)
    }
}

/// EU(b, steps_remaining).
pub fn expected_utility(
    model: &PomdpModel,
    b: &Belief,
    cfg: &PlanConfig,
    steps_remaining: usize,
) -> Result<f64> {
    cfg.validate()?;
    if steps_remaining > cfg.horizon {
        return Err(Error::InvalidConfig(format!(
            "steps_remaining {steps_remaining} exceeds horizon {}",
            cfg.horizon
        )));
    }
    let search = Search {
        model,
        gamma: cfg.discount_for(model.discount()),
        cap: cfg.observation_branch_cap,
        order: cfg.search_order(model.actions()),
    };
    search.value(b, steps_remaining, &mut Stats::default())
}

/// argmax_a Q(b, a) with the lowest-index tie-break. Root subtrees are
/// evaluated in parallel and reduced in action order.
pub fn select_action(model: &PomdpModel, b: &Belief, cfg: &PlanConfig) -> Result<PlanResult> {
    let all: Vec<usize> = (0..model.num_actions()).collect();
    select_action_among(model, b, cfg, &all)
}

/// Like [`select_action`] but only the `allowed` root actions are candidates;
/// the others get a Q-value of negative infinity. Deeper levels still
/// maximize over every action.
pub fn select_action_among(
    model: &PomdpModel,
    b: &Belief,
    cfg: &PlanConfig,
    allowed: &[usize],
) -> Result<PlanResult> {
    cfg.validate()?;
    if model.num_actions() == 0 || allowed.is_empty() {
        return Err(Error::NoActions);
    }
    let search = Search {
        model,
        gamma: cfg.discount_for(model.discount()),
        cap: cfg.observation_branch_cap,
        order: cfg.search_order(model.actions()),
    };
    let roots: Vec<usize> = search
        .order
        .iter()
        .copied()
        .filter(|a| allowed.contains(a))
        .collect();
    let per_action: Vec<(usize, Result<(f64, Stats)>)> = roots
        .par_iter()
        .map(|&a| {
            let mut st = Stats::default();
            let q = search.q(b, a, cfg.horizon, &mut st);
            (a, q.map(|q| (q, st)))
        })
        .collect();
    let mut q_values = vec![f64::NEG_INFINITY; model.num_actions()];
    let mut stats = Stats::default();
    for (a, res) in per_action {
        let (q, st) = res?;
        q_values[a] = q;
        stats += st;
    }
    PlanResult::from_q(q_values, stats.nodes, stats.pruned)
}
