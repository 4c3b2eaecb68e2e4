use rayon::prelude::*;

use super::{expand_interactive, InteractiveBelief, JointModel, NestingConfig};
use crate::error::{Error, Result};
use crate::planner::{cap_branches, PlanConfig, PlanResult};

struct Search<'a> {
    jm: &'a JointModel,
    gamma: f64,
    cap: Option<usize>,
    nest: &'a NestingConfig,
    priority: Vec<usize>,
}

#[derive(Default, Clone, Copy)]
struct Stats {
    nodes: u64,
    pruned: u64,
}

impl Search<'_> {
    /// Own actions available at this belief: those available in every
    /// physical state of the support.
    fn available(&self, ib: &InteractiveBelief) -> Vec<usize> {
        let mut avail = self.jm.own_available(ib.branches()[0].0.physical);
        for (st, _) in &ib.branches()[1..] {
            let here = self.jm.own_available(st.physical);
            avail.retain(|a| here.contains(a));
        }
        let mut ordered: Vec<usize> = self
            .priority
            .iter()
            .copied()
            .filter(|a| avail.contains(a))
            .collect();
        ordered.extend(avail.iter().copied().filter(|a| !self.priority.contains(a)));
        ordered
    }

    fn value(&self, ib: &InteractiveBelief, steps: usize, stats: &mut Stats) -> Result<f64> {
        if steps == 0 {
            return self.jm.utility_of(ib);
        }
        let mut best = f64::NEG_INFINITY;
        for a in self.available(ib) {
            best = best.max(self.q(ib, a, steps, stats)?);
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::NoActions);
        }
        Ok(best)
    }

    fn q(&self, ib: &InteractiveBelief, a: usize, steps: usize, stats: &mut Stats) -> Result<f64> {
        let r = self.jm.utility_of(ib)?;
        let mut branches: Vec<(f64, InteractiveBelief)> = expand_interactive(self.jm, ib, a, self.nest)?
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

/// Expectimax over own actions and own observations, with the other agent's
/// actions marginalized through its nested model at every node. The horizon
/// counts joint steps.
pub fn solve_level_k(
    jm: &JointModel,
    ib: &InteractiveBelief,
    cfg: &PlanConfig,
    nest: &NestingConfig,
) -> Result<PlanResult> {
    solve_among(jm, ib, cfg, nest, None)
}

pub(crate) fn solve_among(
    jm: &JointModel,
    ib: &InteractiveBelief,
    cfg: &PlanConfig,
    nest: &NestingConfig,
    allowed: Option<&[usize]>,
) -> Result<PlanResult> {
    if cfg.horizon == 0 {
        return Err(Error::InvalidConfig("action selection needs horizon >= 1".into()));
    }
    cfg.validate()?;
    if ib.is_empty() {
        return Err(Error::InvalidBelief("no branches".into()));
    }
    let search = Search {
        jm,
        gamma: cfg.discount_for(jm.discount()),
        cap: cfg.observation_branch_cap,
        nest,
        priority: cfg
            .action_priority
            .as_ref()
            .map(|names| {
                names
                    .iter()
                    .filter_map(|n| jm.own_actions().iter().position(|l| l == n))
                    .collect()
            })
            .unwrap_or_default(),
    };
    let mut roots = search.available(ib);
    if let Some(allowed) = allowed {
        roots.retain(|a| allowed.contains(a));
    }
    if roots.is_empty() {
        return Err(Error::NoActions);
    }
    let results: Vec<(usize, Result<(f64, Stats)>)> = roots
        .par_iter()
        .map(|&a| {
            let mut st = Stats::default();
            let q = search.q(ib, a, cfg.horizon, &mut st);
            (a, q.map(|q| (q, st)))
        })
        .collect();
    let mut q_values = vec![f64::NEG_INFINITY; jm.own_actions().len()];
    let (mut nodes, mut pruned) = (0, 0);
    for (a, res) in results {
        let (q, st) = res?;
        q_values[a] = q;
        nodes += st.nodes;
        pruned += st.pruned;
    }
    PlanResult::from_q(q_values, nodes, pruned)
}
