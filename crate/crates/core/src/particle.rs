//! Sampled beliefs: weighted particle sets over physical states or over
//! interactive states that carry an exact model of the other agent.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nesting::{
    advance_model, teacher_action_distribution, InteractiveBelief, InteractiveState, JointModel,
    NestingConfig,
};
use crate::pomdp::{Belief, PomdpModel, StateFactors};

/// Component name that selects the whole physical state in [`pf_marginal`].
pub const PHYSICAL: &str = "state";

#[derive(Debug, Clone, PartialEq)]
pub enum Particles {
    Flat(Vec<usize>),
    Interactive(Vec<InteractiveState>),
}

impl Particles {
    fn physical(&self, i: usize) -> usize {
        match self {
            Particles::Flat(p) => p[i],
            Particles::Interactive(p) => p[i].physical,
        }
    }

    fn pick(&self, idx: &[usize]) -> Particles {
        match self {
            Particles::Flat(p) => Particles::Flat(idx.iter().map(|&i| p[i]).collect()),
            Particles::Interactive(p) => {
                Particles::Interactive(idx.iter().map(|&i| p[i].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParticleSet {
    particles: Particles,
    weights: Vec<f64>,
    rng: ChaCha8Rng,
    num_states: usize,
    factors: Option<StateFactors>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn particles(&self) -> &Particles {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Builds a set from explicit states and weights (weights are normalized).
    pub fn from_weighted(
        states: Vec<usize>,
        weights: Vec<f64>,
        num_states: usize,
        factors: Option<StateFactors>,
        seed: u64,
    ) -> Result<Self> {
        if states.is_empty() || states.len() != weights.len() {
            return Err(Error::InvalidBelief(format!(
                "{} particles with {} weights",
                states.len(),
                weights.len()
            )));
        }
        if let Some(&s) = states.iter().find(|&&s| s >= num_states) {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                len: num_states,
            });
        }
        let weights = normalized(weights)?;
        Ok(ParticleSet {
            particles: Particles::Flat(states),
            weights,
            rng: ChaCha8Rng::seed_from_u64(seed),
            num_states,
            factors,
        })
    }
}

fn normalized(mut w: Vec<f64>) -> Result<Vec<f64>> {
    if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidBelief("negative or non-finite particle weight".into()));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ParticleCollapse);
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

fn draw<R: Rng>(rng: &mut R, items: &[(usize, f64)]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(i, p) in items {
        acc += p;
        if u < acc {
            return i;
        }
    }
    items.last().expect("non-empty distribution").0
}

fn check_count(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidConfig("particle count must be at least 1".into()));
    }
    Ok(())
}

/// Draws `m` particles i.i.d. from `belief` with uniform weights.
pub fn pf_init(model: &PomdpModel, belief: &Belief, m: usize, seed: u64) -> Result<ParticleSet> {
    check_count(m)?;
    if belief.len() != model.num_states() {
        return Err(Error::SizeMismatch {
            belief: belief.len(),
            states: model.num_states(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support: Vec<(usize, f64)> = belief.support().collect();
    let states = (0..m).map(|_| draw(&mut rng, &support)).collect();
    Ok(ParticleSet {
        particles: Particles::Flat(states),
        weights: vec![1.0 / m as f64; m],
        rng,
        num_states: model.num_states(),
        factors: model.factors().cloned(),
    })
}

/// Draws `m` interactive particles i.i.d. from the branches of `ib`.
pub fn pf_init_interactive(
    jm: &JointModel,
    ib: &InteractiveBelief,
    m: usize,
    seed: u64,
) -> Result<ParticleSet> {
    check_count(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let branches: Vec<(usize, f64)> = ib.branches().iter().map(|(_, w)| *w).enumerate().collect();
    let particles = (0..m)
        .map(|_| ib.branches()[draw(&mut rng, &branches)].0.clone())
        .collect();
    Ok(ParticleSet {
        particles: Particles::Interactive(particles),
        weights: vec![1.0 / m as f64; m],
        rng,
        num_states: jm.num_states(),
        factors: jm.factors().cloned(),
    })
}

/// Indices chosen by systematic resampling: one uniform offset, `m` evenly
/// spaced pointers through the cumulative weights.
pub fn systematic_indices<R: Rng>(rng: &mut R, weights: &[f64]) -> Vec<usize> {
    let m = weights.len();
    let u0: f64 = rng.gen::<f64>() / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut acc = weights[0];
    let mut i = 0;
    for k in 0..m {
        let u = u0 + k as f64 / m as f64;
        while u >= acc && i + 1 < m {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
    }
    out
}

fn finish(mut ps: ParticleSet, particles: Particles, raw: Vec<f64>) -> Result<ParticleSet> {
    let weights = normalized(raw)?;
    let m = weights.len();
    ps.particles = particles;
    ps.weights = weights;
    if ps.ess() < m as f64 / 2.0 {
        let idx = systematic_indices(&mut ps.rng, &ps.weights);
        ps.particles = ps.particles.pick(&idx);
        ps.weights = vec![1.0 / m as f64; m];
    }
    Ok(ps)
}

/// Propagates flat particles through `a` and reweights by `o`.
pub fn pf_update(ps: &ParticleSet, model: &PomdpModel, a: usize, o: usize) -> Result<ParticleSet> {
    let Particles::Flat(states) = &ps.particles else {
        return Err(Error::InvalidBelief("interactive particles need a joint model".into()));
    };
    if a >= model.num_actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: a,
            len: model.num_actions(),
        });
    }
    if o >= model.num_observations() {
        return Err(Error::IndexOutOfRange {
            what: "observation",
            index: o,
            len: model.num_observations(),
        });
    }
    let mut ps = ps.clone();
    let mut next = Vec::with_capacity(states.len());
    let mut raw = Vec::with_capacity(states.len());
    for (&s, &w) in states.iter().zip(&ps.weights) {
        let s2 = draw(&mut ps.rng, model.transition_row(s, a));
        let lik = likelihood(model.observation_row(s2), o);
        next.push(s2);
        raw.push(w * lik);
    }
    finish(ps, Particles::Flat(next), raw)
}

fn likelihood(row: &[(usize, f64)], o: usize) -> f64 {
    row.iter().find(|(x, _)| *x == o).map_or(0.0, |(_, p)| *p)
}

/// Nested step: each particle samples the other agent's action from its
/// carried model, the next physical state, and the other agent's
/// observation; it is weighted by the likelihood of `o_own`.
pub fn pf_update_interactive(
    ps: &ParticleSet,
    jm: &JointModel,
    a_own: usize,
    o_own: usize,
    cfg: &NestingConfig,
) -> Result<ParticleSet> {
    let Particles::Interactive(states) = &ps.particles else {
        return Err(Error::InvalidBelief("flat particles need a flat model".into()));
    };
    if a_own >= jm.own_actions().len() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: a_own,
            len: jm.own_actions().len(),
        });
    }
    if o_own >= jm.own_observations().len() {
        return Err(Error::IndexOutOfRange {
            what: "observation",
            index: o_own,
            len: jm.own_observations().len(),
        });
    }
    let nb = jm.other_actions().len();
    let mut ps = ps.clone();
    let mut next = Vec::with_capacity(states.len());
    let mut raw = Vec::with_capacity(states.len());
    for (st, &w) in states.iter().zip(&ps.weights) {
        let s = st.physical;
        let dist = teacher_action_distribution(
            &st.other,
            &[(s, 1.0)],
            &jm.other_available(s),
            nb,
            cfg.depth_cap,
        )?;
        let dist: Vec<(usize, f64)> = dist.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect();
        let a_other = draw(&mut ps.rng, &dist);
        let s2 = draw(&mut ps.rng, jm.transition_row(s, a_own, a_other));
        let lik = likelihood(jm.own_obs_row(s2, a_other), o_own);
        let o_other = draw(&mut ps.rng, jm.other_obs_row(s2, a_own));
        let other = if lik > 0.0 {
            advance_model(&st.other, a_other, o_other, cfg)?
        } else {
            Arc::clone(&st.other)
        };
        next.push(InteractiveState { physical: s2, other });
        raw.push(w * lik);
    }
    finish(ps, Particles::Interactive(next), raw)
}

/// Weighted histogram over one named state component, or over the whole
/// physical state for [`PHYSICAL`].
pub fn pf_marginal(ps: &ParticleSet, component: &str) -> Result<Belief> {
    let mut full = vec![0.0; ps.num_states];
    for (i, w) in ps.weights.iter().enumerate() {
        full[ps.particles.physical(i)] += w;
    }
    if component == PHYSICAL {
        return Belief::from_unnormalized(full);
    }
    let factors = ps
        .factors
        .as_ref()
        .ok_or_else(|| Error::UnknownComponent(component.to_string()))?;
    let c = factors.component_index(component)?;
    Belief::from_unnormalized(factors.marginal(&full, &[c])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fixtures::{two_door, two_door_belief};

    #[test]
    fn delta_prior_gives_identical_particles() {
        let m = two_door(0.9);
        let ps = pf_init(&m, &Belief::delta(4, 2), 50, 1).unwrap();
        assert_eq!(ps.particles(), &Particles::Flat(vec![2; 50]));
        assert!(ps.weights().iter().all(|&w| w == 1.0 / 50.0));
    }

    #[test]
    fn zero_particles_rejected() {
        let m = two_door(0.9);
        assert!(pf_init(&m, &Belief::uniform(4), 0, 1).is_err());
    }

    #[test]
    fn direct_histogram() {
        let ps = ParticleSet::from_weighted(vec![0, 1], vec![0.25, 0.75], 2, None, 0).unwrap();
        assert_eq!(pf_marginal(&ps, PHYSICAL).unwrap().probs(), &[0.25, 0.75]);
        assert!(matches!(
            pf_marginal(&ps, "door"),
            Err(Error::UnknownComponent(_))
        ));
    }

    #[test]
    fn named_component() {
        let m = two_door(0.9);
        let ps = pf_init(&m, &two_door_belief(0.5), 1000, 3).unwrap();
        let door = pf_marginal(&ps, "door").unwrap();
        assert_eq!(door.len(), 2);
        assert!((door.probs()[0] - 0.5).abs() < 0.06);
        assert!(matches!(
            pf_marginal(&ps, "window"),
            Err(Error::UnknownComponent(_))
        ));
    }

    #[test]
    fn systematic_counts_are_floor_or_ceil() {
        let w = [0.1, 0.25, 0.05, 0.6];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let idx = systematic_indices(&mut rng, &w);
            for (i, wi) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&j| j == i).count() as f64;
                let e = wi * w.len() as f64;
                assert!(c == e.floor() || c == e.ceil(), "count {c} for expected {e}");
            }
        }
    }
}
