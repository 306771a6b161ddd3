//! Potentials (variance, truncated entropy) and independence diagnostics.

use super::{PseudoDistribution, ZERO_PROB};
use crate::error::Result;
use crate::instance::dist;

/// `E_i tr Cov(x_i)` computed from the singleton tables.
pub fn variance_potential(mu: &PseudoDistribution) -> f64 {
    let n = mu.num_vars();
    let total: f64 = (0..n).map(|i| trace_cov(mu, i)).sum();
    total / n as f64
}

fn mean_point(mu: &PseudoDistribution, i: usize) -> Vec<f64> {
    let alpha = mu.space().alphabet(i);
    let mut mean = vec![0.0; alpha.dim()];
    for (p, x) in mu.marginal(i).iter().zip(alpha.points()) {
        for (m, c) in mean.iter_mut().zip(x) {
            *m += p * c;
        }
    }
    mean
}

fn trace_cov(mu: &PseudoDistribution, i: usize) -> f64 {
    let mean = mean_point(mu, i);
    let alpha = mu.space().alphabet(i);
    mu.marginal(i)
        .iter()
        .zip(alpha.points())
        .map(|(p, x)| p * x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

/// Per-variable balls used to truncate `x_i` before taking entropy. Outcomes
/// outside the ball are merged into a single symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

impl Truncation {
    /// Balls of radius `c` standard deviations around the pseudo-mean.
    pub fn from_mu(mu: &PseudoDistribution, c: f64) -> Truncation {
        let n = mu.num_vars();
        Truncation {
            centers: (0..n).map(|i| mean_point(mu, i)).collect(),
            radii: (0..n).map(|i| c * trace_cov(mu, i).sqrt()).collect(),
        }
    }

    /// Balls that never truncate.
    pub fn none(n: usize, dim: usize) -> Truncation {
        Truncation {
            centers: vec![vec![0.0; dim]; n],
            radii: vec![f64::INFINITY; n],
        }
    }
}

fn entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// `E_i H(x̃_i)` in nats with the truncation taken from `mu` itself.
pub fn entropy_potential(mu: &PseudoDistribution, c: f64) -> f64 {
    entropy_potential_truncated(mu, &Truncation::from_mu(mu, c))
}

/// `E_i H(x̃_i)` with a fixed truncation. Keeping the balls fixed while
/// conditioning makes the potential a concave function of the marginals.
pub fn entropy_potential_truncated(mu: &PseudoDistribution, trunc: &Truncation) -> f64 {
    let n = mu.num_vars();
    let total: f64 = (0..n)
        .map(|i| {
            let alpha = mu.space().alphabet(i);
            let mut outside = 0.0;
            let mut inside = Vec::new();
            for (&p, x) in mu.marginal(i).iter().zip(alpha.points()) {
                if dist(x, &trunc.centers[i]) > trunc.radii[i] {
                    outside += p;
                } else {
                    inside.push(p);
                }
            }
            entropy(inside.into_iter().chain([outside]))
        })
        .sum();
    total / n as f64
}

/// Weighted average over unordered pairs `i < j` of
/// `TV(μ_ij, μ_i ⊗ μ_j)`. Returns 0 when all weights vanish.
pub fn avg_pairwise_tv<F: Fn(usize, usize) -> f64>(mu: &PseudoDistribution, weight: F) -> Result<f64> {
    let n = mu.num_vars();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let w = weight(i, j);
            if w == 0.0 {
                continue;
            }
            let t = mu.local(&[i, j])?;
            let (mi, mj) = (mu.marginal(i), mu.marginal(j));
            let qj = mj.len();
            let tv: f64 = t
                .probs
                .iter()
                .enumerate()
                .map(|(e, p)| (p - mi[e / qj] * mj[e % qj]).abs())
                .sum::<f64>()
                / 2.0;
            num += w * tv;
            den += w;
        }
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Finite joint distribution of two real random variables `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub u_values: Vec<f64>,
    pub v_values: Vec<f64>,
    /// `probs[a][b] = P(u = u_values[a], v = v_values[b])`.
    pub probs: Vec<Vec<f64>>,
}

impl JointTable {
    fn v_marginal(&self) -> Vec<f64> {
        (0..self.v_values.len())
            .map(|b| self.probs.iter().map(|row| row[b]).sum())
            .collect()
    }
}

/// Returns `(Var(u) − E_v Var(u | v), Cov(u, v)² / (4 Var(v)))`; the bound
/// is `None` when `Var(v) = 0`.
pub fn var_reduction_terms(joint: &JointTable) -> (f64, Option<f64>) {
    let mut eu = 0.0;
    let mut ev = 0.0;
    let mut euu = 0.0;
    let mut evv = 0.0;
    let mut euv = 0.0;
    for (a, row) in joint.probs.iter().enumerate() {
        let u = joint.u_values[a];
        for (b, &p) in row.iter().enumerate() {
            let v = joint.v_values[b];
            eu += p * u;
            ev += p * v;
            euu += p * u * u;
            evv += p * v * v;
            euv += p * u * v;
        }
    }
    let var_u = euu - eu * eu;
    let var_v = evv - ev * ev;
    let cov = euv - eu * ev;
    let mut expected_cond = 0.0;
    for (b, &pb) in joint.v_marginal().iter().enumerate() {
        if pb <= ZERO_PROB {
            continue;
        }
        let m: f64 = joint.probs.iter().zip(&joint.u_values).map(|(r, u)| r[b] * u).sum::<f64>() / pb;
        let var: f64 = joint
            .probs
            .iter()
            .zip(&joint.u_values)
            .map(|(r, u)| r[b] * (u - m) * (u - m))
            .sum::<f64>()
            / pb;
        expected_cond += pb * var;
    }
    let bound = if var_v > 1e-15 {
        Some(cov * cov / (4.0 * var_v))
    } else {
        None
    };
    (var_u - expected_cond, bound)
}

/// Checks `Var(u) − E_v Var(u|v) ≥ Cov(u,v)²/(4 Var v)` up to 1e-12.
/// Vacuously true when `Var(v) = 0`.
pub fn check_var_reduction(joint: &JointTable) -> bool {
    match var_reduction_terms(joint) {
        (decrease, Some(bound)) => decrease >= bound - 1e-12,
        (_, None) => true,
    }
}
