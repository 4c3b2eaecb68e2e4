//! Particle-filter tracking error against the exact nested update along
//! simulated episodes.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::domain::{StudentProblem, Turn};
use crate::error::{Error, Result};
use crate::particle::{pf_init_interactive, pf_marginal, pf_update_interactive, PHYSICAL};

use super::episode::{Channel, Episode};
use super::rng::{stream, Stream};

/// L1 distance between the particle and exact physical marginals after each
/// of `steps` simulated steps.
pub fn pf_tracking_errors(
    problem: Arc<StudentProblem>,
    seed: u64,
    particles: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    let jm = problem.model.clone();
    let nesting = problem.nesting;
    let n = jm.num_states();
    let mut ep = Episode::new(problem, seed)?;
    let pf_seed: u64 = stream(seed, 0, Stream::Particles).gen();
    let mut ps = pf_init_interactive(&jm, ep.agent().belief(), particles, pf_seed)?;
    let mut errors = Vec::with_capacity(steps);
    for _ in 0..steps {
        match ep.turn() {
            Turn::Teacher => ep.teacher_step(None, Channel::Noisy)?,
            Turn::Student => ep.student_step(None)?,
        };
        let (a, o) = ep.last_view().expect("a step was taken");
        ps = pf_update_interactive(&ps, &jm, a, o, &nesting)?;
        let approx = pf_marginal(&ps, PHYSICAL)?;
        let exact = ep.agent().belief().physical_marginal(n);
        errors.push(
            approx
                .probs()
                .iter()
                .zip(&exact)
                .map(|(p, q)| (p - q).abs())
                .sum(),
        );
    }
    Ok(errors)
}

/// Mean tracking error over seeds `0..n_seeds` and all steps.
pub fn mean_pf_error(problem: Arc<StudentProblem>, n_seeds: u64, particles: usize, steps: usize) -> Result<f64> {
    let per_seed: Vec<Vec<f64>> = (0..n_seeds)
        .into_par_iter()
        .map(|seed| {
            pf_tracking_errors(problem.clone(), seed, particles, steps).map_err(|e| Error::AtSeed {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let count: usize = per_seed.iter().map(Vec::len).sum();
    Ok(per_seed.iter().flatten().sum::<f64>() / count as f64)
}
