use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    advance_model, teacher_action_distribution, AgentModel, InteractiveBelief, InteractiveState,
    JointModel, NestedBelief, NestingConfig,
};
use crate::error::{Error, Result};
use crate::pomdp::Belief;

/// Raw unnormalized branches grouped by own observation.
type Buckets = BTreeMap<usize, Vec<(InteractiveState, f64)>>;

fn expand_raw(
    jm: &JointModel,
    ib: &InteractiveBelief,
    a_own: usize,
    only: Option<usize>,
    cfg: &NestingConfig,
) -> Result<Buckets> {
    let nb = jm.other_actions.len();
    let mut buckets: Buckets = BTreeMap::new();
    for (st, w) in ib.branches() {
        let s = st.physical;
        let available = jm.other_available(s);
        let dist = teacher_action_distribution(&st.other, &[(s, 1.0)], &available, nb, cfg.depth_cap)?;
        // (a_other, o_other) → advanced model, computed once per branch
        let mut advanced: BTreeMap<(usize, usize), Arc<AgentModel>> = BTreeMap::new();
        for (a_other, &pa) in dist.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for &(s2, pt) in jm.transition_row(s, a_own, a_other) {
                for &(o_own, po) in jm.own_obs_row(s2, a_other) {
                    if only.is_some_and(|o| o != o_own) {
                        continue;
                    }
                    for &(o_other, pq) in jm.other_obs_row(s2, a_own) {
                        let model = match advanced.get(&(a_other, o_other)) {
                            Some(m) => m.clone(),
                            None => {
                                let m = advance_model(&st.other, a_other, o_other, cfg)?;
                                advanced.insert((a_other, o_other), m.clone());
                                m
                            }
                        };
                        buckets.entry(o_own).or_default().push((
                            InteractiveState {
                                physical: s2,
                                other: model,
                            },
                            w * pa * pt * po * pq,
                        ));
                    }
                }
            }
        }
    }
    Ok(buckets)
}

/// Every reachable own observation after acting `a_own`, with its
/// probability and the resulting interactive belief, in observation order.
pub fn expand_interactive(
    jm: &JointModel,
    ib: &InteractiveBelief,
    a_own: usize,
    cfg: &NestingConfig,
) -> Result<Vec<(usize, f64, InteractiveBelief)>> {
    let buckets = expand_raw(jm, ib, a_own, None, cfg)?;
    let mut out = Vec::with_capacity(buckets.len());
    for (o, raw) in buckets {
        let mass: f64 = raw.iter().map(|(_, w)| w).sum();
        if mass > 0.0 {
            out.push((o, mass, prune_merge_raw(raw, cfg.prune_epsilon, cfg.merge_l1)?));
        }
    }
    Ok(out)
}

/// Nested Bayesian update after acting `a_own` and observing `o_own`.
pub fn interactive_belief_update(
    jm: &JointModel,
    ib: &InteractiveBelief,
    a_own: usize,
    o_own: usize,
    cfg: &NestingConfig,
) -> Result<InteractiveBelief> {
    if a_own >= jm.own_actions.len() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: a_own,
            len: jm.own_actions.len(),
        });
    }
    if o_own >= jm.own_observations.len() {
        return Err(Error::IndexOutOfRange {
            what: "observation",
            index: o_own,
            len: jm.own_observations.len(),
        });
    }
    let mut buckets = expand_raw(jm, ib, a_own, Some(o_own), cfg)?;
    let raw = buckets.remove(&o_own).unwrap_or_default();
    let mass: f64 = raw.iter().map(|(_, w)| w).sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    prune_merge_raw(raw, cfg.prune_epsilon, cfg.merge_l1)
}

/// Drops branches lighter than `prune_epsilon`, merges branches with the same
/// physical state whose models are within `merge_l1`, and renormalizes.
pub fn prune_merge(
    ib: &InteractiveBelief,
    prune_epsilon: f64,
    merge_l1: f64,
) -> Result<InteractiveBelief> {
    prune_merge_raw(ib.branches().to_vec(), prune_epsilon, merge_l1)
}

fn merge_models(a: &Arc<AgentModel>, wa: f64, b: &Arc<AgentModel>, wb: f64) -> Arc<AgentModel> {
    if let (AgentModel::LevelK(ma), AgentModel::LevelK(mb)) = (&**a, &**b) {
        if let (
            NestedBelief::Flat { belief: x, grounding },
            NestedBelief::Flat { belief: y, .. },
        ) = (&ma.belief, &mb.belief)
        {
            if x == y {
                return a.clone();
            }
            let t = wa + wb;
            let avg: Vec<f64> = x
                .probs()
                .iter()
                .zip(y.probs())
                .map(|(p, q)| (wa * p + wb * q) / t)
                .collect();
            if let Ok(belief) = Belief::from_unnormalized(avg) {
                let mut merged = ma.clone();
                merged.belief = NestedBelief::Flat {
                    belief,
                    grounding: grounding.clone(),
                };
                return Arc::new(AgentModel::LevelK(merged));
            }
        }
    }
    a.clone()
}

pub(crate) fn prune_merge_raw(
    raw: Vec<(InteractiveState, f64)>,
    prune_epsilon: f64,
    merge_l1: f64,
) -> Result<InteractiveBelief> {
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    // group by physical state, keeping first-seen order within a state
    let mut by_state: BTreeMap<usize, Vec<(Arc<AgentModel>, f64)>> = BTreeMap::new();
    for (st, w) in raw {
        let w = w / total;
        if w == 0.0 {
            continue;
        }
        let group = by_state.entry(st.physical).or_default();
        match group
            .iter_mut()
            .find(|(m, _)| Arc::ptr_eq(m, &st.other) || m.equivalent(&st.other, merge_l1))
        {
            Some((m, wm)) => {
                *m = merge_models(m, *wm, &st.other, w);
                *wm += w;
            }
            None => group.push((st.other, w)),
        }
    }
    let mut branches: Vec<(InteractiveState, f64)> = by_state
        .into_iter()
        .flat_map(|(s, group)| {
            group.into_iter().map(move |(other, w)| {
                (
                    InteractiveState {
                        physical: s,
                        other,
                    },
                    w,
                )
            })
        })
        .filter(|(_, w)| *w >= prune_epsilon)
        .collect();
    let kept: f64 = branches.iter().map(|(_, w)| w).sum();
    if branches.is_empty() || !(kept > 0.0) {
        return Err(Error::AllPruned);
    }
    for (_, w) in &mut branches {
        *w /= kept;
    }
    Ok(InteractiveBelief::from_raw(branches))
}
