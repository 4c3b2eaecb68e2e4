//! Finite POMDP models and exact Bayesian belief updates.
//!
//! Tables are stored as sparse rows over flat state indices. A belief update
//! is
//!
//!   b'(s') = β · O(o | s') · Σ_s T(s' | s, a) · b(s)
//!
//! with the observation conditioned on the arrived-at state only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for row sums and belief normalization checks.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Sparse probability row: `(index, probability)` pairs, strictly positive,
/// sorted by index.
pub type SparseRow = Vec<(usize, f64)>;

/// Builds a sparse row from a dense vector, dropping exact zeros.
pub fn sparse_from_dense(dense: &[f64]) -> SparseRow {
    dense
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(i, &p)| (i, p))
        .collect()
}

/// Merges duplicate indices, drops zeros and sorts.
pub fn normalize_row(mut row: SparseRow) -> SparseRow {
    row.sort_by_key(|&(i, _)| i);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (i, p) in row {
        match out.last_mut() {
            Some((j, q)) if *j == i => *q += p,
            _ => out.push((i, p)),
        }
    }
    out.retain(|&(_, p)| p != 0.0);
    out
}

pub(crate) fn check_row(row: &[(usize, f64)], len: usize, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &(i, p) in row {
        if i >= len {
            return Err(Error::InvalidModel(format!(
                "{what}: index {i} out of range (len {len})"
            )));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidModel(format!("{what}: bad probability {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what}: row sums to {sum}")));
    }
    Ok(())
}

/// Probability vector over the states of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidBelief(format!("bad entry {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Belief(probs))
    }

    /// Normalizes a non-negative vector. Fails with `ZeroNormalizer` on zero mass.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroNormalizer);
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Belief(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn delta(n: usize, at: usize) -> Self {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        Belief(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices with non-zero mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (i, p))
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Index of the largest entry (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.0
    }
}

/// Shannon entropy in bits with `0 log 0 = 0`.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// One named factor of a product state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateComponent {
    pub name: String,
    pub values: Vec<String>,
}

/// Factorization of the flat state index as a mixed-radix number, first
/// component most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateFactors {
    pub components: Vec<StateComponent>,
}

impl StateFactors {
    pub fn new(components: Vec<StateComponent>) -> Self {
        StateFactors { components }
    }

    pub fn num_states(&self) -> usize {
        self.components.iter().map(|c| c.values.len()).product()
    }

    pub fn component_index(&self, name: &str) -> Result<usize> {
        self.components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownComponent(name.to_string()))
    }

    /// Splits a flat index into per-component values.
    pub fn decompose(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.components.len()];
        for (k, c) in self.components.iter().enumerate().rev() {
            let n = c.values.len();
            out[k] = flat % n;
            flat /= n;
        }
        out
    }

    pub fn compose(&self, parts: &[usize]) -> usize {
        self.components
            .iter()
            .zip(parts)
            .fold(0, |acc, (c, &v)| acc * c.values.len() + v)
    }

    /// Size of the joint space over the masked components.
    pub fn masked_size(&self, mask: &[usize]) -> Result<usize> {
        let mut n = 1;
        for &k in mask {
            let c = self
                .components
                .get(k)
                .ok_or_else(|| Error::UnknownComponent(k.to_string()))?;
            n *= c.values.len();
        }
        Ok(n)
    }

    /// Index of a flat state within the masked sub-space.
    pub fn masked_index(&self, flat: usize, mask: &[usize]) -> usize {
        let parts = self.decompose(flat);
        mask.iter()
            .fold(0, |acc, &k| acc * self.components[k].values.len() + parts[k])
    }

    /// Marginal of a flat probability vector over the masked components.
    pub fn marginal(&self, probs: &[f64], mask: &[usize]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.masked_size(mask)?];
        for (s, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                out[self.masked_index(s, mask)] += p;
            }
        }
        Ok(out)
    }
}

/// Utility function over beliefs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    NegEntropy,
    /// Negative entropy of the marginal over the listed state components.
    NegEntropyOverSubset { mask: Vec<usize> },
    ExpectedStateReward { rewards: Vec<f64> },
}

impl UtilitySpec {
    pub fn validate(&self, num_states: usize, factors: Option<&StateFactors>) -> Result<()> {
        match self {
            UtilitySpec::NegEntropy => Ok(()),
            UtilitySpec::NegEntropyOverSubset { mask } => {
                if mask.is_empty() {
                    return Err(Error::InvalidUtility("empty component mask".into()));
                }
                let f = factors.ok_or_else(|| {
                    Error::InvalidUtility("component mask without state factorization".into())
                })?;
                f.masked_size(mask)
                    .map_err(|e| Error::InvalidUtility(e.to_string()))?;
                Ok(())
            }
            UtilitySpec::ExpectedStateReward { rewards } => {
                if rewards.len() != num_states {
                    return Err(Error::InvalidUtility(format!(
                        "reward vector has {} entries for {num_states} states",
                        rewards.len()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, probs: &[f64], factors: Option<&StateFactors>) -> Result<f64> {
        match self {
            UtilitySpec::NegEntropy => Ok(-entropy_bits(probs)),
            UtilitySpec::NegEntropyOverSubset { mask } => {
                let f = factors.ok_or_else(|| {
                    Error::InvalidUtility("component mask without state factorization".into())
                })?;
                if f.num_states() != probs.len() {
                    return Err(Error::InvalidUtility(
                        "factorization does not cover the state space".into(),
                    ));
                }
                Ok(-entropy_bits(&f.marginal(probs, mask)?))
            }
            UtilitySpec::ExpectedStateReward { rewards } => {
                if rewards.len() != probs.len() {
                    return Err(Error::SizeMismatch {
                        belief: probs.len(),
                        states: rewards.len(),
                    });
                }
                Ok(rewards.iter().zip(probs).map(|(r, p)| r * p).sum())
            }
        }
    }
}

/// The tuple ⟨S, A, T, Ω, O, R⟩ plus a discount factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PomdpModel {
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    /// `transition[s][a]` is the distribution over next states.
    transition: Vec<Vec<SparseRow>>,
    /// `observation_model[s']` is the distribution over observations.
    observation_model: Vec<SparseRow>,
    utility: UtilitySpec,
    discount: f64,
    factors: Option<StateFactors>,
}

impl PomdpModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        observations: Vec<String>,
        transition: Vec<Vec<SparseRow>>,
        observation_model: Vec<SparseRow>,
        utility: UtilitySpec,
        discount: f64,
        factors: Option<StateFactors>,
    ) -> Result<Self> {
        let model = PomdpModel {
            states,
            actions,
            observations,
            transition: transition
                .into_iter()
                .map(|rows| rows.into_iter().map(normalize_row).collect())
                .collect(),
            observation_model: observation_model.into_iter().map(normalize_row).collect(),
            utility,
            discount,
            factors,
        };
        model.validate()?;
        Ok(model)
    }

    /// Builds a model from dense tables `T[s][a][s']` and `O[s'][o]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_dense(
        states: Vec<String>,
        actions: Vec<String>,
        observations: Vec<String>,
        transition: &[Vec<Vec<f64>>],
        observation_model: &[Vec<f64>],
        utility: UtilitySpec,
        discount: f64,
        factors: Option<StateFactors>,
    ) -> Result<Self> {
        let ns = states.len();
        let no = observations.len();
        for (s, rows) in transition.iter().enumerate() {
            for row in rows {
                if row.len() != ns {
                    return Err(Error::InvalidModel(format!(
                        "transition row for state {s} has {} entries, expected {ns}",
                        row.len()
                    )));
                }
            }
        }
        for (s, row) in observation_model.iter().enumerate() {
            if row.len() != no {
                return Err(Error::InvalidModel(format!(
                    "observation row for state {s} has {} entries, expected {no}",
                    row.len()
                )));
            }
        }
        let t = transition
            .iter()
            .map(|rows| rows.iter().map(|r| sparse_from_dense(r)).collect())
            .collect();
        let o = observation_model
            .iter()
            .map(|r| sparse_from_dense(r))
            .collect();
        Self::new(states, actions, observations, t, o, utility, discount, factors)
    }

    pub fn validate(&self) -> Result<()> {
        let ns = self.states.len();
        let na = self.actions.len();
        let no = self.observations.len();
        if ns == 0 {
            return Err(Error::InvalidModel("no states".into()));
        }
        if no == 0 {
            return Err(Error::InvalidModel("no observations".into()));
        }
        if self.transition.len() != ns {
            return Err(Error::InvalidModel(format!(
                "transition has {} state rows, expected {ns}",
                self.transition.len()
            )));
        }
        for (s, rows) in self.transition.iter().enumerate() {
            if rows.len() != na {
                return Err(Error::InvalidModel(format!(
                    "transition for state {s} has {} action rows, expected {na}",
                    rows.len()
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                check_row(row, ns, &format!("T[{s}][{a}]"))?;
            }
        }
        if self.observation_model.len() != ns {
            return Err(Error::InvalidModel(format!(
                "observation model has {} rows, expected {ns}",
                self.observation_model.len()
            )));
        }
        for (s, row) in self.observation_model.iter().enumerate() {
            check_row(row, no, &format!("O[{s}]"))?;
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::InvalidModel(format!(
                "discount {} outside [0, 1]",
                self.discount
            )));
        }
        if let Some(f) = &self.factors {
            if f.num_states() != ns {
                return Err(Error::InvalidModel(format!(
                    "state components span {} states, model has {ns}",
                    f.num_states()
                )));
            }
        }
        self.utility.validate(ns, self.factors.as_ref())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }
    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }
    pub fn states(&self) -> &[String] {
        &self.states
    }
    pub fn actions(&self) -> &[String] {
        &self.actions
    }
    pub fn observations(&self) -> &[String] {
        &self.observations
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
    pub fn transition_row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transition[s][a]
    }
    pub fn observation_row(&self, s: usize) -> &[(usize, f64)] {
        &self.observation_model[s]
    }

    /// Copy of this model with a different utility function.
    pub fn with_utility(&self, utility: UtilitySpec) -> Result<Self> {
        utility.validate(self.num_states(), self.factors.as_ref())?;
        Ok(PomdpModel {
            utility,
            ..self.clone()
        })
    }

    /// Dense `T[s][a][s']`.
    pub fn dense_transition(&self) -> Vec<Vec<Vec<f64>>> {
        let ns = self.num_states();
        self.transition
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| {
                        let mut d = vec![0.0; ns];
                        for &(i, p) in row {
                            d[i] = p;
                        }
                        d
                    })
                    .collect()
            })
            .collect()
    }

    /// Dense `O[s'][o]`.
    pub fn dense_observation(&self) -> Vec<Vec<f64>> {
        let no = self.num_observations();
        self.observation_model
            .iter()
            .map(|row| {
                let mut d = vec![0.0; no];
                for &(i, p) in row {
                    d[i] = p;
                }
                d
            })
            .collect()
    }

    fn check_belief(&self, b: &Belief) -> Result<()> {
        if b.len() != self.num_states() {
            return Err(Error::SizeMismatch {
                belief: b.len(),
                states: self.num_states(),
            });
        }
        Ok(())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                len: self.num_actions(),
            });
        }
        Ok(())
    }

    fn check_observation(&self, o: usize) -> Result<()> {
        if o >= self.num_observations() {
            return Err(Error::IndexOutOfRange {
                what: "observation",
                index: o,
                len: self.num_observations(),
            });
        }
        Ok(())
    }

    fn predict_raw(&self, b: &Belief, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_states()];
        for (s, p) in b.support() {
            for &(s2, t) in &self.transition[s][a] {
                out[s2] += t * p;
            }
        }
        out
    }

    /// Σ_s T(s'|s,a)·b(s) for every s'.
    pub fn predict(&self, b: &Belief, a: usize) -> Result<Belief> {
        self.check_belief(b)?;
        self.check_action(a)?;
        Belief::from_unnormalized(self.predict_raw(b, a))
    }

    /// Posterior after acting `a` and observing `o`.
    pub fn belief_update(&self, b: &Belief, a: usize, o: usize) -> Result<Belief> {
        self.check_belief(b)?;
        self.check_action(a)?;
        self.check_observation(o)?;
        let mut post = self.predict_raw(b, a);
        for (s2, w) in post.iter_mut().enumerate() {
            if *w > 0.0 {
                *w *= self.obs_prob(s2, o);
            }
        }
        Belief::from_unnormalized(post)
    }

    fn obs_prob(&self, s: usize, o: usize) -> f64 {
        self.observation_model[s]
            .iter()
            .find(|&&(i, _)| i == o)
            .map_or(0.0, |&(_, p)| p)
    }

    /// P(o | b, a) for every observation.
    pub fn observation_likelihood(&self, b: &Belief, a: usize) -> Result<Vec<f64>> {
        self.check_belief(b)?;
        self.check_action(a)?;
        let pred = self.predict_raw(b, a);
        let mut out = vec![0.0; self.num_observations()];
        for (s2, &p) in pred.iter().enumerate() {
            if p > 0.0 {
                for &(o, q) in &self.observation_model[s2] {
                    out[o] += q * p;
                }
            }
        }
        Ok(out)
    }

    /// Every reachable observation with its likelihood and posterior, in
    /// observation order.
    pub fn expand(&self, b: &Belief, a: usize) -> Result<Vec<(usize, f64, Belief)>> {
        self.check_belief(b)?;
        self.check_action(a)?;
        let pred = self.predict_raw(b, a);
        let ns = self.num_states();
        let mut joint: Vec<Option<Vec<f64>>> = vec![None; self.num_observations()];
        for (s2, &p) in pred.iter().enumerate() {
            if p > 0.0 {
                for &(o, q) in &self.observation_model[s2] {
                    joint[o].get_or_insert_with(|| vec![0.0; ns])[s2] += q * p;
                }
            }
        }
        let mut out = Vec::new();
        for (o, row) in joint.into_iter().enumerate() {
            if let Some(row) = row {
                let mass: f64 = row.iter().sum();
                if mass > 0.0 {
                    out.push((o, mass, Belief::from_unnormalized(row)?));
                }
            }
        }
        Ok(out)
    }

    /// R(b) under this model's utility.
    pub fn utility_eval(&self, b: &Belief) -> Result<f64> {
        self.check_belief(b)?;
        self.utility.eval(b.probs(), self.factors.as_ref())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PomdpDoc::from(self)).expect("model serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: PomdpDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Free-function form of [`PomdpModel::utility_eval`].
pub fn utility_eval(spec: &UtilitySpec, b: &Belief, factors: Option<&StateFactors>) -> Result<f64> {
    spec.eval(b.probs(), factors)
}

/// Serialized table row: dense numbers or sparse `[index, probability]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowDoc {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

impl RowDoc {
    pub fn into_sparse(self, len: usize, what: &str) -> Result<SparseRow> {
        match self {
            RowDoc::Dense(d) => {
                if d.len() != len {
                    return Err(Error::InvalidModel(format!(
                        "{what}: dense row has {} entries, expected {len}",
                        d.len()
                    )));
                }
                Ok(sparse_from_dense(&d))
            }
            RowDoc::Sparse(s) => Ok(s),
        }
    }

    /// Dense encoding for small spaces, sparse otherwise.
    pub fn encode(row: &[(usize, f64)], len: usize) -> RowDoc {
        if len <= 64 {
            let mut d = vec![0.0; len];
            for &(i, p) in row {
                d[i] = p;
            }
            RowDoc::Dense(d)
        } else {
            RowDoc::Sparse(row.to_vec())
        }
    }
}

pub const POMDP_FORMAT: &str = "pomdp/1";

/// On-disk `pomdp/1` document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PomdpDoc {
    pub format: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub transition: Vec<Vec<RowDoc>>,
    pub observation_model: Vec<RowDoc>,
    pub utility: UtilitySpec,
    pub discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_components: Option<StateFactors>,
}

impl From<&PomdpModel> for PomdpDoc {
    fn from(m: &PomdpModel) -> Self {
        let ns = m.num_states();
        let no = m.num_observations();
        PomdpDoc {
            format: POMDP_FORMAT.into(),
            states: m.states.clone(),
            actions: m.actions.clone(),
            observations: m.observations.clone(),
            transition: m
                .transition
                .iter()
                .map(|rows| rows.iter().map(|r| RowDoc::encode(r, ns)).collect())
                .collect(),
            observation_model: m
                .observation_model
                .iter()
                .map(|r| RowDoc::encode(r, no))
                .collect(),
            utility: m.utility.clone(),
            discount: m.discount,
            state_components: m.factors.clone(),
        }
    }
}

impl TryFrom<PomdpDoc> for PomdpModel {
    type Error = Error;
    fn try_from(doc: PomdpDoc) -> Result<Self> {
        if doc.format != POMDP_FORMAT {
            return Err(Error::Format(format!(
                "expected format {POMDP_FORMAT}, found {}",
                doc.format
            )));
        }
        let ns = doc.states.len();
        let no = doc.observations.len();
        let transition = doc
            .transition
            .into_iter()
            .enumerate()
            .map(|(s, rows)| {
                rows.into_iter()
                    .enumerate()
                    .map(|(a, r)| r.into_sparse(ns, &format!("T[{s}][{a}]")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let observation_model = doc
            .observation_model
            .into_iter()
            .enumerate()
            .map(|(s, r)| r.into_sparse(no, &format!("O[{s}]")))
            .collect::<Result<Vec<_>>>()?;
        PomdpModel::new(
            doc.states,
            doc.actions,
            doc.observations,
            transition,
            observation_model,
            doc.utility,
            doc.discount,
            doc.state_components,
        )
    }
}
