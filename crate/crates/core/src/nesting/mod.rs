//! Interactive states, recursive agent models and nested belief updates for
//! a two-agent setting.
//!
//! The modeling agent ("own") keeps a weighted set of interactive states,
//! each pairing a physical state with a model of the other agent. A model is
//! either a level-0 stochastic policy or a level-k planner that carries its
//! own belief; the chain of models must end in a level-0 policy.

mod doc;
mod solve;
mod update;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{argmax_set, select_action_among, PlanConfig};
use crate::pomdp::{check_row, normalize_row, Belief, PomdpModel, SparseRow, StateFactors, UtilitySpec};

pub use doc::{InteractiveProblem, IPOMDP_FORMAT};
pub use solve::solve_level_k;
pub use update::{expand_interactive, interactive_belief_update, prune_merge};

/// Tuning for nested updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestingConfig {
    pub prune_epsilon: f64,
    pub merge_l1: f64,
    pub depth_cap: usize,
}

impl Default for NestingConfig {
    fn default() -> Self {
        NestingConfig {
            prune_epsilon: 1e-6,
            merge_l1: 1e-9,
            depth_cap: 3,
        }
    }
}

/// Non-interactive grounding model: one action distribution per physical state.
#[derive(Debug, Clone, PartialEq)]
pub struct Level0Policy {
    rows: Vec<SparseRow>,
    num_actions: usize,
}

impl Level0Policy {
    pub fn new(rows: Vec<SparseRow>, num_actions: usize) -> Result<Self> {
        let rows: Vec<SparseRow> = rows.into_iter().map(normalize_row).collect();
        for (s, row) in rows.iter().enumerate() {
            check_row(row, num_actions, &format!("policy[{s}]"))?;
        }
        Ok(Level0Policy { rows, num_actions })
    }

    pub fn row(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }
}

/// The other agent's decision problem as seen by the modeling agent.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentFrame {
    /// Single-agent problem over the shared physical states; the grounding
    /// counterpart is folded into its transition.
    Pomdp(PomdpModel),
    /// Interactive problem from the other agent's point of view.
    Interactive(Arc<JointModel>),
}

/// What a level-k model believes.
#[derive(Debug, Clone, PartialEq)]
pub enum NestedBelief {
    /// Belief over physical states, grounded in a level-0 model of its
    /// counterpart.
    Flat {
        belief: Belief,
        grounding: Arc<Level0Policy>,
    },
    Interactive(InteractiveBelief),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelKModel {
    pub level: usize,
    pub frame: Arc<AgentFrame>,
    pub belief: NestedBelief,
    pub plan: PlanConfig,
    /// Softmax temperature over Q-values; `None` is a strict argmax.
    pub softness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentModel {
    Level0(Arc<Level0Policy>),
    LevelK(LevelKModel),
}

impl AgentModel {
    pub fn level(&self) -> usize {
        match self {
            AgentModel::Level0(_) => 0,
            AgentModel::LevelK(m) => m.level,
        }
    }

    /// Checks that the nesting grounds out in a level-0 policy within
    /// `depth_cap` levels.
    pub fn validate(&self, depth_cap: usize) -> Result<()> {
        self.validate_at(0, depth_cap)
    }

    fn validate_at(&self, depth: usize, cap: usize) -> Result<()> {
        if depth > cap {
            return Err(Error::DepthExceeded { depth, cap });
        }
        match self {
            AgentModel::Level0(_) => Ok(()),
            AgentModel::LevelK(m) => {
                if m.level == 0 {
                    return Err(Error::Ungrounded("level-k model with level 0".into()));
                }
                if depth + m.level > cap {
                    return Err(Error::DepthExceeded {
                        depth: depth + m.level,
                        cap,
                    });
                }
                m.plan.validate()?;
                match (&*m.frame, &m.belief) {
                    (AgentFrame::Pomdp(frame), NestedBelief::Flat { belief, grounding }) => {
                        if m.level != 1 {
                            return Err(Error::Ungrounded(format!(
                                "level {} model holds a flat belief; expected level 1",
                                m.level
                            )));
                        }
                        if belief.len() != frame.num_states()
                            || grounding.num_states() != frame.num_states()
                        {
                            return Err(Error::Ungrounded(
                                "flat belief or grounding does not match its frame".into(),
                            ));
                        }
                        Ok(())
                    }
                    (AgentFrame::Interactive(_), NestedBelief::Interactive(ib)) => {
                        for (st, _) in ib.branches() {
                            if st.other.level() + 1 != m.level {
                                return Err(Error::Ungrounded(format!(
                                    "level {} model nests a level {} model",
                                    m.level,
                                    st.other.level()
                                )));
                            }
                            st.other.validate_at(depth + 1, cap)?;
                        }
                        Ok(())
                    }
                    _ => Err(Error::Ungrounded("frame and belief kinds disagree".into())),
                }
            }
        }
    }

    /// Flat belief of a level-1 model, if any.
    pub fn flat_belief(&self) -> Option<&Belief> {
        match self {
            AgentModel::LevelK(LevelKModel {
                belief: NestedBelief::Flat { belief, .. },
                ..
            }) => Some(belief),
            _ => None,
        }
    }

    /// Whether two models are interchangeable up to `tol` (L1 on beliefs).
    pub fn equivalent(&self, other: &AgentModel, tol: f64) -> bool {
        match (self, other) {
            (AgentModel::Level0(a), AgentModel::Level0(b)) => Arc::ptr_eq(a, b) || a == b,
            (AgentModel::LevelK(a), AgentModel::LevelK(b)) => {
                a.level == b.level
                    && (Arc::ptr_eq(&a.frame, &b.frame) || a.frame == b.frame)
                    && a.plan == b.plan
                    && a.softness == b.softness
                    && match (&a.belief, &b.belief) {
                        (
                            NestedBelief::Flat {
                                belief: x,
                                grounding: gx,
                            },
                            NestedBelief::Flat {
                                belief: y,
                                grounding: gy,
                            },
                        ) => (Arc::ptr_eq(gx, gy) || gx == gy) && x.l1_distance(y) <= tol,
                        (NestedBelief::Interactive(x), NestedBelief::Interactive(y)) => {
                            x.equivalent(y, tol)
                        }
                        _ => false,
                    }
            }
            _ => false,
        }
    }
}

/// Physical state paired with a model of the other agent.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractiveState {
    pub physical: usize,
    pub other: Arc<AgentModel>,
}

/// Weighted finite set of interactive states.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractiveBelief {
    branches: Vec<(InteractiveState, f64)>,
}

impl InteractiveBelief {
    /// Validates weights; does not merge duplicates.
    pub fn new(branches: Vec<(InteractiveState, f64)>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidBelief("no branches".into()));
        }
        let mut sum = 0.0;
        for (_, w) in &branches {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidBelief(format!("bad branch weight {w}")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > crate::pomdp::STOCHASTIC_TOL {
            return Err(Error::InvalidBelief(format!("branch weights sum to {sum}")));
        }
        Ok(InteractiveBelief { branches })
    }

    /// Pairs a physical belief with one shared model of the other agent.
    pub fn from_physical(belief: &Belief, other: Arc<AgentModel>) -> Self {
        InteractiveBelief {
            branches: belief
                .support()
                .map(|(s, p)| {
                    (
                        InteractiveState {
                            physical: s,
                            other: other.clone(),
                        },
                        p,
                    )
                })
                .collect(),
        }
    }

    pub(crate) fn from_raw(branches: Vec<(InteractiveState, f64)>) -> Self {
        InteractiveBelief { branches }
    }

    pub fn branches(&self) -> &[(InteractiveState, f64)] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Marginal over physical states.
    pub fn physical_marginal(&self, num_states: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_states];
        for (st, w) in &self.branches {
            out[st.physical] += w;
        }
        out
    }

    pub fn equivalent(&self, other: &InteractiveBelief, tol: f64) -> bool {
        self.branches.len() == other.branches.len()
            && self
                .branches
                .iter()
                .zip(&other.branches)
                .all(|((a, wa), (b, wb))| {
                    a.physical == b.physical
                        && (wa - wb).abs() <= tol
                        && a.other.equivalent(&b.other, tol)
                })
    }

    pub fn validate_models(&self, depth_cap: usize) -> Result<()> {
        for (st, _) in &self.branches {
            st.other.validate(depth_cap)?;
        }
        Ok(())
    }
}

/// Two-agent model: shared physical states, both action sets, the joint
/// transition and both observation models. "Own" is the modeling agent,
/// "other" its counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub(crate) states: Vec<String>,
    pub(crate) own_actions: Vec<String>,
    pub(crate) other_actions: Vec<String>,
    pub(crate) own_observations: Vec<String>,
    pub(crate) other_observations: Vec<String>,
    /// `[s][a_own][a_other]` → next-state distribution.
    pub(crate) transition: Vec<Vec<Vec<SparseRow>>>,
    /// `[s'][a_other]` → distribution over own observations.
    pub(crate) own_obs: Vec<Vec<SparseRow>>,
    /// `[s'][a_own]` → distribution over the other agent's observations.
    pub(crate) other_obs: Vec<Vec<SparseRow>>,
    /// Actions available to each agent per state; an empty list means all.
    pub(crate) own_available: Vec<Vec<usize>>,
    pub(crate) other_available: Vec<Vec<usize>>,
    pub(crate) utility: UtilitySpec,
    pub(crate) discount: f64,
    pub(crate) factors: Option<StateFactors>,
}

/// Raw parts for [`JointModel::new`].
#[derive(Debug, Clone, Default)]
pub struct JointModelParts {
    pub states: Vec<String>,
    pub own_actions: Vec<String>,
    pub other_actions: Vec<String>,
    pub own_observations: Vec<String>,
    pub other_observations: Vec<String>,
    pub transition: Vec<Vec<Vec<SparseRow>>>,
    pub own_obs: Vec<Vec<SparseRow>>,
    pub other_obs: Vec<Vec<SparseRow>>,
    pub own_available: Vec<Vec<usize>>,
    pub other_available: Vec<Vec<usize>>,
    pub utility: Option<UtilitySpec>,
    pub discount: f64,
    pub factors: Option<StateFactors>,
}

impl JointModel {
    pub fn new(p: JointModelParts) -> Result<Self> {
        let ns = p.states.len();
        let jm = JointModel {
            transition: p
                .transition
                .into_iter()
                .map(|a| {
                    a.into_iter()
                        .map(|b| b.into_iter().map(normalize_row).collect())
                        .collect()
                })
                .collect(),
            own_obs: p
                .own_obs
                .into_iter()
                .map(|r| r.into_iter().map(normalize_row).collect())
                .collect(),
            other_obs: p
                .other_obs
                .into_iter()
                .map(|r| r.into_iter().map(normalize_row).collect())
                .collect(),
            own_available: if p.own_available.is_empty() {
                vec![Vec::new(); ns]
            } else {
                p.own_available
            },
            other_available: if p.other_available.is_empty() {
                vec![Vec::new(); ns]
            } else {
                p.other_available
            },
            states: p.states,
            own_actions: p.own_actions,
            other_actions: p.other_actions,
            own_observations: p.own_observations,
            other_observations: p.other_observations,
            utility: p.utility.unwrap_or(UtilitySpec::NegEntropy),
            discount: p.discount,
            factors: p.factors,
        };
        jm.validate()?;
        Ok(jm)
    }

    pub fn validate(&self) -> Result<()> {
        let ns = self.states.len();
        let (na, nb) = (self.own_actions.len(), self.other_actions.len());
        let (no, np) = (self.own_observations.len(), self.other_observations.len());
        if ns == 0 || na == 0 || nb == 0 || no == 0 || np == 0 {
            return Err(Error::InvalidModel("empty state, action or observation set".into()));
        }
        let shape_err = |what: &str| Err(Error::InvalidModel(format!("{what} has the wrong shape")));
        if self.transition.len() != ns {
            return shape_err("transition");
        }
        for (s, rows) in self.transition.iter().enumerate() {
            if rows.len() != na || rows.iter().any(|r| r.len() != nb) {
                return shape_err("transition");
            }
            for (a, r) in rows.iter().enumerate() {
                for (b, row) in r.iter().enumerate() {
                    check_row(row, ns, &format!("T[{s}][{a}][{b}]"))?;
                }
            }
        }
        if self.own_obs.len() != ns || self.own_obs.iter().any(|r| r.len() != nb) {
            return shape_err("own observation model");
        }
        for (s, rows) in self.own_obs.iter().enumerate() {
            for (b, row) in rows.iter().enumerate() {
                check_row(row, no, &format!("O_own[{s}][{b}]"))?;
            }
        }
        if self.other_obs.len() != ns || self.other_obs.iter().any(|r| r.len() != na) {
            return shape_err("other observation model");
        }
        for (s, rows) in self.other_obs.iter().enumerate() {
            for (a, row) in rows.iter().enumerate() {
                check_row(row, np, &format!("O_other[{s}][{a}]"))?;
            }
        }
        if self.own_available.len() != ns || self.other_available.len() != ns {
            return shape_err("availability table");
        }
        for list in &self.own_available {
            if list.iter().any(|&a| a >= na) {
                return Err(Error::InvalidModel("own availability index out of range".into()));
            }
        }
        for list in &self.other_available {
            if list.iter().any(|&a| a >= nb) {
                return Err(Error::InvalidModel("other availability index out of range".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::InvalidModel(format!("discount {} outside [0, 1]", self.discount)));
        }
        if let Some(f) = &self.factors {
            if f.num_states() != ns {
                return Err(Error::InvalidModel("state components do not cover the states".into()));
            }
        }
        self.utility.validate(ns, self.factors.as_ref())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }
    pub fn states(&self) -> &[String] {
        &self.states
    }
    pub fn own_actions(&self) -> &[String] {
        &self.own_actions
    }
    pub fn other_actions(&self) -> &[String] {
        &self.other_actions
    }
    pub fn own_observations(&self) -> &[String] {
        &self.own_observations
    }
    pub fn other_observations(&self) -> &[String] {
        &self.other_observations
    }
    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }
    pub fn discount(&self) -> f64 {
        self.discount
    }
    pub fn factors(&self) -> Option<&StateFactors> {
        self.factors.as_ref()
    }
    pub fn transition_row(&self, s: usize, a_own: usize, a_other: usize) -> &[(usize, f64)] {
        &self.transition[s][a_own][a_other]
    }
    pub fn own_obs_row(&self, s_next: usize, a_other: usize) -> &[(usize, f64)] {
        &self.own_obs[s_next][a_other]
    }
    pub fn other_obs_row(&self, s_next: usize, a_own: usize) -> &[(usize, f64)] {
        &self.other_obs[s_next][a_own]
    }

    /// Own actions available in physical state `s`.
    pub fn own_available(&self, s: usize) -> Vec<usize> {
        if self.own_available[s].is_empty() {
            (0..self.own_actions.len()).collect()
        } else {
            self.own_available[s].clone()
        }
    }

    pub fn other_available(&self, s: usize) -> Vec<usize> {
        if self.other_available[s].is_empty() {
            (0..self.other_actions.len()).collect()
        } else {
            self.other_available[s].clone()
        }
    }

    /// Own utility of an interactive belief, through its physical marginal.
    pub fn utility_of(&self, ib: &InteractiveBelief) -> Result<f64> {
        self.utility
            .eval(&ib.physical_marginal(self.num_states()), self.factors.as_ref())
    }

    /// Single-agent model obtained by fixing the other agent's behavior to a
    /// level-0 policy.
    pub fn reduce_with_policy(&self, policy: &Level0Policy) -> Result<PomdpModel> {
        let ns = self.num_states();
        let mut transition = Vec::with_capacity(ns);
        let mut obs_rows: Vec<Option<SparseRow>> = vec![None; ns];
        for s in 0..ns {
            let mut rows = Vec::with_capacity(self.own_actions.len());
            for a in 0..self.own_actions.len() {
                let mut row = Vec::new();
                for &(b, pb) in policy.row(s) {
                    for &(s2, pt) in &self.transition[s][a][b] {
                        row.push((s2, pb * pt));
                        let o = self.own_obs[s2][b].clone();
                        match &obs_rows[s2] {
                            None => obs_rows[s2] = Some(o),
                            Some(prev) if *prev == o => {}
                            Some(_) => {
                                return Err(Error::InvalidModel(
                                    "observation depends on the other agent's action; \
                                     no single-agent reduction"
                                        .into(),
                                ))
                            }
                        }
                    }
                }
                rows.push(row);
            }
            transition.push(rows);
        }
        let observation_model = obs_rows
            .into_iter()
            .map(|r| r.unwrap_or_else(|| vec![(0, 1.0)]))
            .collect();
        PomdpModel::new(
            self.states.clone(),
            self.own_actions.clone(),
            self.own_observations.clone(),
            transition,
            observation_model,
            self.utility.clone(),
            self.discount,
            self.factors.clone(),
        )
    }
}

/// Distribution over the other agent's actions predicted by `model`, given
/// the sparse physical context and the actions available there.
pub fn teacher_action_distribution(
    model: &AgentModel,
    context: &[(usize, f64)],
    available: &[usize],
    num_actions: usize,
    depth_cap: usize,
) -> Result<Vec<f64>> {
    action_distribution_at(model, context, available, num_actions, 0, depth_cap)
}

fn action_distribution_at(
    model: &AgentModel,
    context: &[(usize, f64)],
    available: &[usize],
    num_actions: usize,
    depth: usize,
    depth_cap: usize,
) -> Result<Vec<f64>> {
    if depth > depth_cap {
        return Err(Error::DepthExceeded {
            depth,
            cap: depth_cap,
        });
    }
    let mut out = vec![0.0; num_actions];
    if available.len() == 1 {
        out[available[0]] = 1.0;
        return Ok(out);
    }
    match model {
        AgentModel::Level0(policy) => {
            for &(s, ps) in context {
                for &(a, pa) in policy.row(s) {
                    out[a] += ps * pa;
                }
            }
            Ok(out)
        }
        AgentModel::LevelK(m) => {
            if depth + m.level > depth_cap {
                return Err(Error::DepthExceeded {
                    depth: depth + m.level,
                    cap: depth_cap,
                });
            }
            let q = match (&*m.frame, &m.belief) {
                (AgentFrame::Pomdp(frame), NestedBelief::Flat { belief, .. }) => {
                    select_action_among(frame, belief, &m.plan, available)?.q_values
                }
                (AgentFrame::Interactive(jm), NestedBelief::Interactive(ib)) => {
                    let cfg = NestingConfig {
                        depth_cap: depth_cap.saturating_sub(depth + 1),
                        ..NestingConfig::default()
                    };
                    solve::solve_among(jm, ib, &m.plan, &cfg, Some(available))?.q_values
                }
                _ => return Err(Error::Ungrounded("frame and belief kinds disagree".into())),
            };
            match m.softness {
                Some(temp) if temp > 0.0 => {
                    let max = available
                        .iter()
                        .map(|&a| q[a])
                        .fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for &a in available {
                        out[a] = ((q[a] - max) / temp).exp();
                        total += out[a];
                    }
                    for v in &mut out {
                        *v /= total;
                    }
                }
                _ => {
                    let best = argmax_set(&q);
                    let p = 1.0 / best.len() as f64;
                    for a in best {
                        out[a] = p;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Advances the other agent's model after it acted `a_other` and observed
/// `o_other`.
pub fn advance_model(
    model: &Arc<AgentModel>,
    a_other: usize,
    o_other: usize,
    cfg: &NestingConfig,
) -> Result<Arc<AgentModel>> {
    match &**model {
        AgentModel::Level0(_) => Ok(model.clone()),
        AgentModel::LevelK(m) => {
            let belief = match (&*m.frame, &m.belief) {
                (AgentFrame::Pomdp(frame), NestedBelief::Flat { belief, grounding }) => {
                    NestedBelief::Flat {
                        belief: frame.belief_update(belief, a_other, o_other)?,
                        grounding: grounding.clone(),
                    }
                }
                (AgentFrame::Interactive(jm), NestedBelief::Interactive(ib)) => {
                    NestedBelief::Interactive(interactive_belief_update(
                        jm, ib, a_other, o_other, cfg,
                    )?)
                }
                _ => return Err(Error::Ungrounded("frame and belief kinds disagree".into())),
            };
            Ok(Arc::new(AgentModel::LevelK(LevelKModel {
                belief,
                ..m.clone()
            })))
        }
    }
}
