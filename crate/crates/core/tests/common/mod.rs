#![allow(dead_code)]

use ipteach::pomdp::{Belief, PomdpModel, UtilitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random distribution of length `n`; about a third of the entries are
/// zeroed, never all of them.
pub fn random_dist<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() + 1e-3 })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.gen_range(0..n)] = 1.0;
    }
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub struct Shape {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_observations: usize,
    pub identity: bool,
}

pub fn random_model<R: Rng>(rng: &mut R, shape: &Shape) -> PomdpModel {
    let ns = rng.gen_range(2..=shape.max_states);
    let na = rng.gen_range(1..=shape.max_actions);
    let no = rng.gen_range(1..=shape.max_observations);
    let t: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|s| {
            (0..na)
                .map(|_| {
                    if shape.identity {
                        (0..ns).map(|x| if x == s { 1.0 } else { 0.0 }).collect()
                    } else {
                        random_dist(rng, ns)
                    }
                })
                .collect()
        })
        .collect();
    let o: Vec<Vec<f64>> = (0..ns).map(|_| random_dist(rng, no)).collect();
    let discount = rng.gen_range(0.5..1.0);
    PomdpModel::from_dense(
        labels("s", ns),
        labels("a", na),
        labels("o", no),
        &t,
        &o,
        UtilitySpec::NegEntropy,
        discount,
        None,
    )
    .expect("random model is valid")
}

pub fn random_belief<R: Rng>(rng: &mut R, n: usize) -> Belief {
    Belief::new(random_dist(rng, n)).expect("valid")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

use ipteach::nesting::{JointModel, JointModelParts};
use ipteach::pomdp::{sparse_from_dense, SparseRow};

fn random_row<R: Rng>(rng: &mut R, n: usize) -> SparseRow {
    sparse_from_dense(&random_dist(rng, n))
}

/// Small random joint model. With `other_blind_obs` the own observation
/// does not depend on the other agent's action.
pub fn random_joint<R: Rng>(rng: &mut R, max: usize, other_blind_obs: bool) -> JointModel {
    let ns = rng.gen_range(2..=max);
    let (na, nb) = (rng.gen_range(1..=max), rng.gen_range(1..=max));
    let (no, np) = (rng.gen_range(1..=max), rng.gen_range(1..=max));
    let transition = (0..ns)
        .map(|_| {
            (0..na)
                .map(|_| (0..nb).map(|_| random_row(rng, ns)).collect())
                .collect()
        })
        .collect();
    let own_obs = (0..ns)
        .map(|_| {
            let shared = random_row(rng, no);
            (0..nb)
                .map(|_| if other_blind_obs { shared.clone() } else { random_row(rng, no) })
                .collect()
        })
        .collect();
    let other_obs = (0..ns)
        .map(|_| (0..na).map(|_| random_row(rng, np)).collect())
        .collect();
    JointModel::new(JointModelParts {
        states: labels("s", ns),
        own_actions: labels("a", na),
        other_actions: labels("b", nb),
        own_observations: labels("o", no),
        other_observations: labels("p", np),
        transition,
        own_obs,
        other_obs,
        discount: rng.gen_range(0.5..1.0),
        ..JointModelParts::default()
    })
    .expect("random joint model is valid")
}
