//! Brute-force reference implementations used to check the engine.
//!
//! Nothing here shares code with the planner or the nested update: every
//! branch of every action, observation and teacher action is enumerated with
//! no pruning and no caps. Branches are only combined when they are exactly
//! identical (same physical state and bitwise-equal teacher belief).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nesting::{AgentFrame, AgentModel, InteractiveBelief, JointModel, Level0Policy, NestedBelief};
use crate::planner::TIE_TOL;
use crate::pomdp::{Belief, PomdpModel, StateFactors, UtilitySpec};

pub const MAX_SUPPORT: usize = 32;
pub const MAX_HORIZON: usize = 4;

fn guard(support: usize, horizon: usize) -> Result<()> {
    if support > MAX_SUPPORT {
        return Err(Error::GuardRail(format!(
            "belief support {support} exceeds {MAX_SUPPORT}"
        )));
    }
    if horizon > MAX_HORIZON {
        return Err(Error::GuardRail(format!(
            "horizon {horizon} exceeds {MAX_HORIZON}"
        )));
    }
    Ok(())
}

fn entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// Utility evaluated from first principles.
pub fn utility(spec: &UtilitySpec, probs: &[f64], factors: Option<&StateFactors>) -> Result<f64> {
    match spec {
        UtilitySpec::NegEntropy => Ok(-entropy(probs)),
        UtilitySpec::ExpectedStateReward { rewards } => {
            Ok(rewards.iter().zip(probs).map(|(r, p)| r * p).sum())
        }
        UtilitySpec::NegEntropyOverSubset { mask } => {
            let f = factors.ok_or_else(|| Error::InvalidUtility("no factorization".into()))?;
            let sizes: Vec<usize> = f.components.iter().map(|c| c.values.len()).collect();
            let mut width = 1;
            for &k in mask {
                width *= sizes[k];
            }
            let mut marg = vec![0.0; width];
            for (s, &p) in probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let mut digits = vec![0; sizes.len()];
                let mut rest = s;
                for k in (0..sizes.len()).rev() {
                    digits[k] = rest % sizes[k];
                    rest /= sizes[k];
                }
                let mut idx = 0;
                for &k in mask {
                    idx = idx * sizes[k] + digits[k];
                }
                marg[idx] += p;
            }
            Ok(-entropy(&marg))
        }
    }
}

/// Joint enumeration of P(s', o | b, a) for one action: `out[o][s']`.
fn joint_table(model: &PomdpModel, b: &[f64], a: usize) -> Vec<Vec<f64>> {
    let ns = model.num_states();
    let mut out = vec![vec![0.0; ns]; model.num_observations()];
    for (s, &p) in b.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for &(s2, t) in model.transition_row(s, a) {
            for &(o, q) in model.observation_row(s2) {
                out[o][s2] += p * t * q;
            }
        }
    }
    out
}

/// Posterior by joint enumeration; `None` when the observation is impossible.
pub fn enumerate_update(model: &PomdpModel, b: &Belief, a: usize, o: usize) -> Option<Vec<f64>> {
    let mut row = joint_table(model, b.probs(), a).swap_remove(o);
    let z: f64 = row.iter().sum();
    if z <= 0.0 {
        return None;
    }
    for v in &mut row {
        *v /= z;
    }
    Some(row)
}

fn flat_value(model: &PomdpModel, b: &[f64], steps: usize, gamma: f64) -> Result<f64> {
    let r = utility(model.utility(), b, model.factors())?;
    if steps == 0 {
        return Ok(r);
    }
    let mut best = f64::NEG_INFINITY;
    for a in 0..model.num_actions() {
        best = best.max(flat_q(model, b, a, steps, gamma, r)?);
    }
    Ok(best)
}

fn flat_q(model: &PomdpModel, b: &[f64], a: usize, steps: usize, gamma: f64, r: f64) -> Result<f64> {
    let mut future = 0.0;
    for row in joint_table(model, b, a) {
        let z: f64 = row.iter().sum();
        if z <= 0.0 {
            continue;
        }
        let post: Vec<f64> = row.iter().map(|v| v / z).collect();
        future += z * flat_value(model, &post, steps - 1, gamma)?;
    }
    Ok(r + gamma * future)
}

/// EU(b, steps) on a flat model.
pub fn brute_force_value(model: &PomdpModel, b: &Belief, steps: usize) -> Result<f64> {
    guard(b.support().count(), steps)?;
    flat_value(model, b.probs(), steps, model.discount())
}

/// Q(b, a) for every action on a flat model. At horizon 0 every entry is
/// the terminal utility R(b).
pub fn brute_force_expectimax(model: &PomdpModel, b: &Belief, horizon: usize) -> Result<Vec<f64>> {
    guard(b.support().count(), horizon)?;
    let r = utility(model.utility(), b.probs(), model.factors())?;
    if horizon == 0 {
        return Ok(vec![r; model.num_actions()]);
    }
    (0..model.num_actions())
        .map(|a| flat_q(model, b.probs(), a, horizon, model.discount(), r))
        .collect()
}

fn argmax_set(q: &[f64]) -> Vec<usize> {
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let thr = max - TIE_TOL * max.abs().max(1.0);
    (0..q.len()).filter(|&i| q[i] >= thr).collect()
}

/// Reference model of the teacher carried along each branch.
#[derive(Debug, Clone)]
pub enum TeacherRef {
    Level0(Arc<Level0Policy>),
    Level1 {
        frame: Arc<AgentFrame>,
        belief: Vec<f64>,
        horizon: usize,
    },
}

impl TeacherRef {
    pub fn from_model(m: &AgentModel) -> Result<Self> {
        match m {
            AgentModel::Level0(p) => Ok(TeacherRef::Level0(p.clone())),
            AgentModel::LevelK(k) => match (&*k.frame, &k.belief) {
                (AgentFrame::Pomdp(_), NestedBelief::Flat { belief, .. }) if k.softness.is_none() => {
                    Ok(TeacherRef::Level1 {
                        frame: k.frame.clone(),
                        belief: belief.probs().to_vec(),
                        horizon: k.plan.horizon,
                    })
                }
                _ => Err(Error::GuardRail(
                    "the oracle handles strict teachers with flat frames only".into(),
                )),
            },
        }
    }

    fn same(&self, other: &TeacherRef) -> bool {
        match (self, other) {
            (TeacherRef::Level0(a), TeacherRef::Level0(b)) => Arc::ptr_eq(a, b),
            (
                TeacherRef::Level1 { frame: fa, belief: ba, .. },
                TeacherRef::Level1 { frame: fb, belief: bb, .. },
            ) => Arc::ptr_eq(fa, fb) && ba == bb,
            _ => false,
        }
    }

    fn frame(frame: &AgentFrame) -> &PomdpModel {
        match frame {
            AgentFrame::Pomdp(m) => m,
            AgentFrame::Interactive(_) => unreachable!("rejected in from_model"),
        }
    }

    /// Teacher action distribution at physical state `s`.
    pub fn distribution(&self, s: usize, available: &[usize], nb: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; nb];
        if available.len() == 1 {
            out[available[0]] = 1.0;
            return Ok(out);
        }
        match self {
            TeacherRef::Level0(p) => {
                for &(a, pa) in p.row(s) {
                    out[a] += pa;
                }
            }
            TeacherRef::Level1 {
                frame,
                belief,
                horizon,
            } => {
                let m = Self::frame(frame);
                let r = utility(m.utility(), belief, m.factors())?;
                let mut q = vec![f64::NEG_INFINITY; nb];
                for &a in available {
                    q[a] = flat_q(m, belief, a, *horizon, m.discount(), r)?;
                }
                let best = argmax_set(&q);
                for &a in &best {
                    out[a] = 1.0 / best.len() as f64;
                }
            }
        }
        Ok(out)
    }

    fn advance(&self, a_j: usize, o_j: usize) -> Option<TeacherRef> {
        match self {
            TeacherRef::Level0(_) => Some(self.clone()),
            TeacherRef::Level1 {
                frame,
                belief,
                horizon,
            } => {
                let m = Self::frame(frame);
                let mut row = joint_table(m, belief, a_j).swap_remove(o_j);
                let z: f64 = row.iter().sum();
                if z <= 0.0 {
                    return None;
                }
                for v in &mut row {
                    *v /= z;
                }
                Some(TeacherRef::Level1 {
                    frame: frame.clone(),
                    belief: row,
                    horizon: *horizon,
                })
            }
        }
    }

    pub fn belief(&self) -> Option<&[f64]> {
        match self {
            TeacherRef::Level0(_) => None,
            TeacherRef::Level1 { belief, .. } => Some(belief),
        }
    }
}

/// Unmerged interactive belief: `(physical, teacher, weight)`.
pub type RefBelief = Vec<(usize, TeacherRef, f64)>;

pub fn ref_belief(ib: &InteractiveBelief) -> Result<RefBelief> {
    ib.branches()
        .iter()
        .map(|(st, w)| Ok((st.physical, TeacherRef::from_model(&st.other)?, *w)))
        .collect()
}

fn push_exact(out: &mut RefBelief, s: usize, t: TeacherRef, w: f64) {
    for (s2, t2, w2) in out.iter_mut() {
        if *s2 == s && t2.same(&t) {
            *w2 += w;
            return;
        }
    }
    out.push((s, t, w));
}

/// Unnormalized successor branches per student observation.
fn joint_expand(jm: &JointModel, b: &RefBelief, a_i: usize) -> Result<Vec<RefBelief>> {
    let nb = jm.other_actions().len();
    let mut per_obs: Vec<RefBelief> = vec![Vec::new(); jm.own_observations().len()];
    for (s, teacher, w) in b {
        let dist = teacher.distribution(*s, &jm.other_available(*s), nb)?;
        for (a_j, &pa) in dist.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for &(s2, pt) in jm.transition_row(*s, a_i, a_j) {
                for &(o_j, pq) in jm.other_obs_row(s2, a_i) {
                    let Some(next) = teacher.advance(a_j, o_j) else {
                        continue;
                    };
                    for &(o_i, po) in jm.own_obs_row(s2, a_j) {
                        push_exact(&mut per_obs[o_i], s2, next.clone(), w * pa * pt * po * pq);
                    }
                }
            }
        }
    }
    Ok(per_obs)
}

fn physical(jm: &JointModel, b: &RefBelief) -> Vec<f64> {
    let mut out = vec![0.0; jm.num_states()];
    for (s, _, w) in b {
        out[*s] += w;
    }
    out
}

fn available(jm: &JointModel, b: &RefBelief) -> Vec<usize> {
    let mut avail = jm.own_available(b[0].0);
    for (s, _, _) in &b[1..] {
        let here = jm.own_available(*s);
        avail.retain(|a| here.contains(a));
    }
    avail
}

fn joint_value(jm: &JointModel, b: &RefBelief, steps: usize, gamma: f64) -> Result<f64> {
    let r = utility(jm.utility(), &physical(jm, b), jm.factors())?;
    if steps == 0 {
        return Ok(r);
    }
    let mut best = f64::NEG_INFINITY;
    for a in available(jm, b) {
        best = best.max(joint_q(jm, b, a, steps, gamma, r)?);
    }
    Ok(best)
}

fn joint_q(jm: &JointModel, b: &RefBelief, a: usize, steps: usize, gamma: f64, r: f64) -> Result<f64> {
    let mut future = 0.0;
    for mut post in joint_expand(jm, b, a)? {
        let z: f64 = post.iter().map(|(_, _, w)| w).sum();
        if z <= 0.0 {
            continue;
        }
        for (_, _, w) in &mut post {
            *w /= z;
        }
        future += z * joint_value(jm, &post, steps - 1, gamma)?;
    }
    Ok(r + gamma * future)
}

/// Q-values of the student's joint expectimax; unavailable actions get
/// negative infinity. `horizon` counts joint steps.
pub fn brute_force_joint(jm: &JointModel, ib: &InteractiveBelief, horizon: usize) -> Result<Vec<f64>> {
    brute_force_joint_ref(jm, &ref_belief(ib)?, horizon)
}

pub fn brute_force_joint_ref(jm: &JointModel, b: &RefBelief, horizon: usize) -> Result<Vec<f64>> {
    let support = physical(jm, b).iter().filter(|&&p| p > 0.0).count();
    guard(support, horizon)?;
    if horizon == 0 {
        return Err(Error::InvalidConfig("joint oracle needs horizon >= 1".into()));
    }
    let gamma = jm.discount();
    let r = utility(jm.utility(), &physical(jm, b), jm.factors())?;
    let mut q = vec![f64::NEG_INFINITY; jm.own_actions().len()];
    for a in available(jm, b) {
        q[a] = joint_q(jm, b, a, horizon, gamma, r)?;
    }
    Ok(q)
}

/// Lowest-index argmax with the engine's tie tolerance.
pub fn chosen(q: &[f64]) -> Option<usize> {
    argmax_set(q).first().copied()
}

/// One nested update by full (a_j, s', o_j) enumeration, grouped by
/// physical state and teacher belief within `merge_l1`, then pruned below
/// `prune_epsilon` and renormalized.
pub fn enumerate_interactive_update(
    jm: &JointModel,
    b: &RefBelief,
    a_i: usize,
    o_i: usize,
    prune_epsilon: f64,
    merge_l1: f64,
) -> Result<RefBelief> {
    let raw = joint_expand(jm, b, a_i)?.swap_remove(o_i);
    let z: f64 = raw.iter().map(|(_, _, w)| w).sum();
    if z <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    let mut grouped: RefBelief = Vec::new();
    for (s, t, w) in raw {
        let hit = grouped.iter_mut().find(|(s2, t2, _)| {
            *s2 == s
                && match (t2.belief(), t.belief()) {
                    (None, None) => t2.same(&t),
                    (Some(x), Some(y)) => {
                        x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() <= merge_l1
                    }
                    _ => false,
                }
        });
        match hit {
            Some((_, t2, w2)) => {
                if let (TeacherRef::Level1 { belief: x, .. }, Some(y)) = (t2, t.belief()) {
                    let tot = *w2 + w;
                    for (p, q) in x.iter_mut().zip(y) {
                        *p = (*p * *w2 + q * w) / tot;
                    }
                }
                *w2 += w;
            }
            None => grouped.push((s, t, w)),
        }
    }
    grouped.retain(|(_, _, w)| w / z >= prune_epsilon);
    let z: f64 = grouped.iter().map(|(_, _, w)| w).sum();
    if grouped.is_empty() {
        return Err(Error::AllPruned);
    }
    for (_, _, w) in &mut grouped {
        *w /= z;
    }
    Ok(grouped)
}

/// Largest weight discrepancy between an engine belief and a reference
/// belief, matching branches by physical state and teacher belief within
/// `tol`. Unmatched mass counts in full.
pub fn max_discrepancy(engine: &InteractiveBelief, reference: &RefBelief, tol: f64) -> Result<f64> {
    let eng = ref_belief(engine)?;
    let mut used = vec![false; reference.len()];
    let mut worst: f64 = 0.0;
    for (s, t, w) in &eng {
        let hit = reference.iter().enumerate().find(|(i, (s2, t2, _))| {
            !used[*i]
                && s2 == s
                && match (t.belief(), t2.belief()) {
                    (None, None) => true,
                    (Some(x), Some(y)) => x.iter().zip(y).all(|(p, q)| (p - q).abs() <= tol),
                    _ => false,
                }
        });
        match hit {
            Some((i, (_, _, w2))) => {
                used[i] = true;
                worst = worst.max((w - w2).abs());
            }
            None => worst = worst.max(*w),
        }
    }
    for (i, (_, _, w)) in reference.iter().enumerate() {
        if !used[i] {
            worst = worst.max(*w);
        }
    }
    Ok(worst)
}
