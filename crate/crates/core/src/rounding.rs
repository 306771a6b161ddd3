//! Seed selection, condition-then-round, and best-of-R repetition.

use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pseudodist::{
    condition, entropy_potential_truncated, sample_index, sample_local, variance_potential, PseudoDistribution,
    Truncation,
};

/// Independent RNG stream `task` derived from a master seed.
pub fn task_rng(master: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(task);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SeedStrategy {
    /// Every subset of the given size.
    Exhaustive(usize),
    /// `weighted` indices drawn proportional to an importance vector plus
    /// `uniform` indices drawn uniformly, all distinct.
    Sampled { weighted: usize, uniform: usize },
    /// Greedy minimization of the expected combined potential.
    GreedyPotential { size: usize, c: f64 },
}

impl SeedStrategy {
    /// The sampled strategy with `size` split as evenly as possible,
    /// weighted half first.
    pub fn sampled(size: usize) -> SeedStrategy {
        SeedStrategy::Sampled {
            weighted: size.div_ceil(2),
            uniform: size / 2,
        }
    }

    pub fn size(&self) -> usize {
        match *self {
            SeedStrategy::Exhaustive(s) => s,
            SeedStrategy::Sampled { weighted, uniform } => weighted + uniform,
            SeedStrategy::GreedyPotential { size, .. } => size,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SeedStrategy::Exhaustive(_) => "exhaustive",
            SeedStrategy::Sampled { .. } => "sampled",
            SeedStrategy::GreedyPotential { .. } => "greedy",
        }
    }

    /// Whether the seed sets can be chosen before the relaxation is solved.
    pub fn needs_mu(&self) -> bool {
        matches!(self, SeedStrategy::GreedyPotential { .. })
    }
}

/// Weights of the greedy potential `λ₁·variance + λ₂·entropy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialWeights {
    pub variance: f64,
    pub entropy: f64,
}

impl PotentialWeights {
    /// `λ₁ = 1/mean_sq` and `λ₂ = 1/ln q`, each falling back to 1 when the
    /// normalizer vanishes.
    pub fn new(mean_sq: f64, q: usize) -> PotentialWeights {
        let lnq = (q as f64).ln();
        PotentialWeights {
            variance: if mean_sq > 0.0 { 1.0 / mean_sq } else { 1.0 },
            entropy: if lnq > 0.0 { 1.0 / lnq } else { 1.0 },
        }
    }
}

/// Every sorted subset of `0..n` with `size` elements.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            if n - v < size - cur.len() {
                break;
            }
            cur.push(v);
            rec(v + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if size <= n {
        rec(0, n, size, &mut Vec::with_capacity(size), &mut out);
    }
    out
}

/// Draws `weighted` distinct indices proportional to `importance` and then
/// `uniform` further distinct indices uniformly (rejection on collisions).
pub fn sample_seed<R: Rng + ?Sized>(importance: &[f64], weighted: usize, uniform: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = importance.len();
    let size = weighted + uniform;
    if size > n {
        return Err(Error::SizeTooLarge { size, limit: n });
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    let all_zero = importance.iter().all(|&w| w <= 0.0);
    while chosen.len() < weighted {
        let i = if all_zero {
            rng.random_range(0..n)
        } else {
            sample_index(importance, rng)
        };
        if !chosen.contains(&i) {
            chosen.push(i);
        } else if importance.iter().enumerate().all(|(j, &w)| w <= 0.0 || chosen.contains(&j)) {
            // every index of positive weight is taken; fall back to uniform
            let rest: Vec<usize> = (0..n).filter(|j| !chosen.contains(j)).collect();
            chosen.push(rest[rng.random_range(0..rest.len())]);
        }
    }
    while chosen.len() < size {
        let i = rng.random_range(0..n);
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Expected value of `λ₁·variance + λ₂·entropy` after conditioning on the
/// variables in `set`, with the values drawn from their joint local table.
pub fn expected_potential(
    mu: &PseudoDistribution,
    set: &[usize],
    trunc: &Truncation,
    weights: PotentialWeights,
) -> Result<f64> {
    let phi = |m: &PseudoDistribution| {
        weights.variance * variance_potential(m) + weights.entropy * entropy_potential_truncated(m, trunc)
    };
    if set.is_empty() {
        return Ok(phi(mu));
    }
    let table = mu.local(set)?;
    let mut total = 0.0;
    for (idx, &p) in table.probs.iter().enumerate() {
        if p <= crate::pseudodist::ZERO_PROB {
            continue;
        }
        let digits = table.digits(idx);
        let mut cur = mu.clone();
        for (&v, &s) in set.iter().zip(&digits) {
            cur = condition(&cur, v, s)?;
        }
        total += p * phi(&cur);
    }
    Ok(total)
}

/// Candidate seed sets for a strategy. `Exhaustive` yields every subset;
/// the other strategies yield a single set. `importance` drives the
/// weighted half of `Sampled`; `mu` is needed only by `GreedyPotential`.
pub fn select_seed<R: Rng + ?Sized>(
    strategy: &SeedStrategy,
    importance: &[f64],
    mu: Option<&PseudoDistribution>,
    weights: PotentialWeights,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let n = importance.len();
    let size = strategy.size();
    if size > n {
        return Err(Error::SizeTooLarge { size, limit: n });
    }
    if let Some(mu) = mu {
        if size + 1 > mu.degree() && size > 0 {
            return Err(Error::SizeTooLarge {
                size,
                limit: mu.degree().saturating_sub(1),
            });
        }
    }
    match *strategy {
        SeedStrategy::Exhaustive(s) => Ok(subsets(n, s)),
        SeedStrategy::Sampled { weighted, uniform } => Ok(vec![sample_seed(importance, weighted, uniform, rng)?]),
        SeedStrategy::GreedyPotential { size, c } => {
            let mu = mu.ok_or_else(|| Error::InvalidParameter("greedy seed selection needs μ".into()))?;
            let trunc = Truncation::from_mu(mu, c);
            let mut chosen: Vec<usize> = Vec::new();
            for _ in 0..size {
                let mut best: Option<(f64, usize)> = None;
                for i in (0..n).filter(|i| !chosen.contains(i)) {
                    let mut set = chosen.clone();
                    set.push(i);
                    set.sort_unstable();
                    let val = expected_potential(mu, &set, &trunc, weights)?;
                    if best.is_none_or(|(b, _)| val < b - 1e-12) {
                        best = Some((val, i));
                    }
                }
                chosen.push(best.expect("candidates remain").1);
            }
            chosen.sort_unstable();
            Ok(vec![chosen])
        }
    }
}

/// Distinct random indices, sorted.
pub fn sample_distinct<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut v = sample_indices(rng, n, count.min(n)).into_vec();
    v.sort_unstable();
    v
}

/// Draws every variable independently from its marginal.
pub fn round_independent<R: Rng + ?Sized>(mu: &PseudoDistribution, rng: &mut R) -> Vec<Vec<f64>> {
    (0..mu.num_vars())
        .map(|i| {
            let s = sample_index(mu.marginal(i), rng);
            mu.space().point(i, s).to_vec()
        })
        .collect()
}

/// One condition-and-round outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundingReport {
    pub anchor: Option<usize>,
    pub seed: Vec<usize>,
    pub seed_values: Vec<Vec<f64>>,
    pub lp_value: f64,
    pub objective: f64,
    pub repetition: usize,
    pub rng_seed: u64,
    pub rng_stream: u64,
    #[serde(skip)]
    pub wall_ms: f64,
}

/// For each of `repeats` repetitions: draws seed values from the seed's
/// local table, conditions on them, rounds independently and evaluates.
/// Returns the best assignment (earliest on ties) with its report.
pub fn condition_and_round<R, F>(
    mu: &PseudoDistribution,
    seed: &[usize],
    eval: F,
    repeats: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, RoundingReport)>
where
    R: Rng + ?Sized,
    F: Fn(&[Vec<f64>]) -> f64,
{
    let start = Instant::now();
    let mut best: Option<(Vec<Vec<f64>>, RoundingReport)> = None;
    for rep in 0..repeats.max(1) {
        let symbols = if seed.is_empty() {
            Vec::new()
        } else {
            sample_local(mu, seed, rng)?
        };
        let mut cur = mu.clone();
        let mut seed_values = Vec::with_capacity(seed.len());
        for (&v, &s) in seed.iter().zip(&symbols) {
            seed_values.push(mu.space().point(v, s).to_vec());
            cur = condition(&cur, v, s)?;
        }
        let points = round_independent(&cur, rng);
        let objective = eval(&points);
        if best.as_ref().is_none_or(|(_, r)| objective < r.objective) {
            best = Some((
                points,
                RoundingReport {
                    anchor: None,
                    seed: seed.to_vec(),
                    seed_values,
                    lp_value: f64::NAN,
                    objective,
                    repetition: rep,
                    rng_seed: 0,
                    rng_stream: 0,
                    wall_ms: 0.0,
                },
            ));
        }
    }
    let (points, mut report) = best.expect("at least one repetition");
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((points, report))
}
