#![allow(dead_code)]

use metricfit::instance::{load_lra, LraInstance};
use metricfit::pseudodist::{Alphabet, PseudoDistribution, VariableSpace};
use rand::seq::SliceRandom;
use rand::Rng;

/// Alphabet of `q` one-dimensional points `0, 1, .., q-1` shifted to be
/// centered.
pub fn line_alphabet(q: usize) -> Alphabet {
    let pts: Vec<Vec<f64>> = (0..q).map(|s| vec![s as f64 - (q as f64 - 1.0) / 2.0]).collect();
    Alphabet::new(1, &pts)
}

/// Random joint distribution over `q^n` outcomes; cubing the weights makes
/// it peaked enough to carry real correlations.
pub fn random_joint<R: Rng>(n: usize, q: usize, rng: &mut R) -> Vec<f64> {
    let size = q.pow(n as u32);
    let w: Vec<f64> = (0..size).map(|_| rng.random::<f64>().powi(3)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// All sorted subsets of `0..n` of size `1..=degree`.
pub fn supports_upto(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize <= degree {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Local marginals of a random actual distribution, on every support of
/// size at most `degree`.
pub fn random_mu<R: Rng>(n: usize, q: usize, degree: usize, rng: &mut R) -> PseudoDistribution {
    let space = VariableSpace::uniform(n, line_alphabet(q), degree);
    let joint = random_joint(n, q, rng);
    PseudoDistribution::from_joint(space, &joint, &supports_upto(n, degree)).unwrap()
}

/// Exact rank-one matrix with balanced factors on `{-2..2}`: `v` is a
/// signed permutation of `u`, so `‖u‖_p = ‖v‖_p`.
pub fn planted_rank_one<R: Rng>(n: usize, p: u32, rng: &mut R) -> (LraInstance, Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = loop {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-2i32..=2) as f64).collect();
        if u.iter().any(|&x| x != 0.0) {
            break u;
        }
    };
    let mut v: Vec<f64> = u.iter().map(|&x| if rng.random_bool(0.5) { x } else { -x }).collect();
    v.shuffle(rng);
    let a: Vec<Vec<f64>> = u.iter().map(|x| v.iter().map(|y| x * y).collect()).collect();
    (load_lra(&a, p).unwrap(), u, v)
}
