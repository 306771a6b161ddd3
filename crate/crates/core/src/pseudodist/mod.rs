//! Sherali-Adams pseudo-distributions represented as families of locally
//! consistent probability tables.
//!
//! A variable takes values in a finite [`Alphabet`] of points in `R^k`. A
//! [`PseudoDistribution`] stores one table per support (a sorted variable
//! tuple of size at most the degree); tables agree on their overlaps. Only
//! the supports that a caller needs are stored: all singletons, all pairs,
//! objective supports and the conditioning closure.
//!
//! Conditioning on `x_i = z` replaces each table `T` by the slice of the
//! table over `T ∪ {i}` at `z`, renormalized. Supports whose extension by `i`
//! is not stored are dropped, and the degree drops by one.

mod potentials;
mod relax;
mod table;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub use potentials::{
    avg_pairwise_tv, check_var_reduction, entropy_potential, entropy_potential_truncated,
    var_reduction_terms, variance_potential, JointTable, Truncation,
};
pub use relax::{build_sa_relaxation, Fixing, Layout, PeConstraint, SaRelaxation, SupportPlan};
pub use table::Table;

/// Probability below which conditioning is refused.
pub const ZERO_PROB: f64 = 1e-12;
/// Tolerance for table normalization.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance for overlap consistency between stored tables.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Finite set of points in `R^dim`, indexed by symbol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alphabet {
    dim: usize,
    coords: Vec<f64>,
}

impl Alphabet {
    pub fn new(dim: usize, points: &[Vec<f64>]) -> Alphabet {
        assert!(dim > 0 && !points.is_empty(), "alphabet needs points of positive dimension");
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            assert_eq!(p.len(), dim, "alphabet point of wrong dimension");
            coords.extend_from_slice(p);
        }
        Alphabet { dim, coords }
    }

    /// All points of `Σ^k`, lexicographic with the first coordinate most
    /// significant.
    pub fn from_grid(grid: &Grid, k: usize) -> Alphabet {
        let vals = grid.values();
        let q = vals.len();
        let total = q.pow(k as u32);
        let mut coords = Vec::with_capacity(total * k);
        let mut digits = vec![0usize; k];
        for mut idx in 0..total {
            for d in (0..k).rev() {
                digits[d] = idx % q;
                idx /= q;
            }
            coords.extend(digits.iter().map(|&d| vals[d]));
        }
        Alphabet { dim: k, coords }
    }

    pub fn single(point: &[f64]) -> Alphabet {
        Alphabet {
            dim: point.len(),
            coords: point.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, s: usize) -> &[f64] {
        &self.coords[s * self.dim..(s + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    /// Symbol of an exact point, if present.
    pub fn position(&self, point: &[f64]) -> Option<usize> {
        self.points().position(|p| p == point)
    }
}

/// Per-variable alphabets together with the degree budget.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpace {
    alphabets: Vec<Arc<Alphabet>>,
    degree: usize,
}

impl VariableSpace {
    pub fn uniform(n: usize, alphabet: Alphabet, degree: usize) -> VariableSpace {
        let a = Arc::new(alphabet);
        VariableSpace {
            alphabets: vec![a; n],
            degree,
        }
    }

    pub fn new(alphabets: Vec<Alphabet>, degree: usize) -> VariableSpace {
        VariableSpace {
            alphabets: alphabets.into_iter().map(Arc::new).collect(),
            degree,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.alphabets.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn alphabet(&self, i: usize) -> &Alphabet {
        &self.alphabets[i]
    }

    pub fn size(&self, i: usize) -> usize {
        self.alphabets[i].len()
    }

    #[inline]
    pub fn point(&self, i: usize, s: usize) -> &[f64] {
        self.alphabets[i].point(s)
    }

    /// Largest alphabet size.
    pub fn max_size(&self) -> usize {
        self.alphabets.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    /// The same space with variable `i` pinned to symbol `s`.
    pub fn restrict(&self, i: usize, s: usize) -> VariableSpace {
        let mut alphabets = self.alphabets.clone();
        alphabets[i] = Arc::new(Alphabet::single(self.alphabets[i].point(s)));
        VariableSpace {
            alphabets,
            degree: self.degree,
        }
    }

    fn with_degree(&self, degree: usize) -> VariableSpace {
        VariableSpace {
            alphabets: self.alphabets.clone(),
            degree,
        }
    }

    pub(crate) fn radices(&self, support: &[usize]) -> Vec<usize> {
        support.iter().map(|&i| self.size(i)).collect()
    }
}

/// Evaluator of a junta: receives the points of its support variables in
/// support order.
pub type JuntaFn = Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>;

/// A function depending on a small, sorted set of variables.
#[derive(Clone)]
pub struct Junta {
    support: Vec<usize>,
    eval: JuntaFn,
}

impl std::fmt::Debug for Junta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Junta").field("support", &self.support).finish()
    }
}

impl Junta {
    /// # Panics
    /// If `support` is not strictly increasing.
    pub fn new<F>(support: Vec<usize>, f: F) -> Junta
    where
        F: Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        assert!(
            support.windows(2).all(|w| w[0] < w[1]),
            "junta support must be strictly increasing"
        );
        Junta {
            support,
            eval: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Junta {
        Junta::new(Vec::new(), move |_| c)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn eval(&self, points: &[&[f64]]) -> f64 {
        (self.eval)(points)
    }

    /// Values of the junta over every entry of a table on the same support.
    pub(crate) fn tabulate(&self, space: &VariableSpace, radices: &[usize]) -> Vec<f64> {
        let size: usize = radices.iter().product();
        let mut digits = vec![0usize; radices.len()];
        let mut pts: Vec<&[f64]> = Vec::with_capacity(radices.len());
        (0..size)
            .map(|mut idx| {
                for d in (0..radices.len()).rev() {
                    digits[d] = idx % radices[d];
                    idx /= radices[d];
                }
                pts.clear();
                pts.extend(
                    self.support
                        .iter()
                        .zip(&digits)
                        .map(|(&v, &s)| space.point(v, s)),
                );
                self.eval(&pts)
            })
            .collect()
    }
}

/// A degree-t Sherali-Adams pseudo-distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoDistribution {
    space: VariableSpace,
    tables: BTreeMap<Vec<usize>, Table>,
    conditioned_on: Vec<(usize, Vec<f64>)>,
}

impl PseudoDistribution {
    /// Builds a pseudo-distribution from explicit tables, checking shapes,
    /// normalization and overlap consistency. Every singleton must be present.
    pub fn from_tables(space: VariableSpace, tables: Vec<Table>) -> Result<PseudoDistribution> {
        let mut map = BTreeMap::new();
        for t in tables {
            if t.support.len() > space.degree() {
                return Err(Error::DegreeExceeded {
                    size: t.support.len(),
                    degree: space.degree(),
                });
            }
            if t.radices != space.radices(&t.support) || t.probs.len() != t.radices.iter().product::<usize>()
            {
                return Err(Error::InvalidParameter(format!(
                    "table {:?} has the wrong shape",
                    t.support
                )));
            }
            map.insert(t.support.clone(), t);
        }
        for i in 0..space.num_vars() {
            if !map.contains_key(&vec![i]) {
                return Err(Error::MissingTable(vec![i]));
            }
        }
        let mu = PseudoDistribution {
            space,
            tables: map,
            conditioned_on: Vec::new(),
        };
        for t in mu.tables.values() {
            if t.probs.iter().any(|&p| p < -NORM_TOL) || (t.total() - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "table {:?} is not a probability distribution",
                    t.support
                )));
            }
        }
        let gap = mu.consistency_gap();
        if gap > CONSISTENCY_TOL {
            return Err(Error::InvalidParameter(format!(
                "tables disagree on overlaps by {gap:e}"
            )));
        }
        Ok(mu)
    }

    /// Local marginals of an actual joint distribution over all variables
    /// (mixed radix, variable 0 most significant) on the given supports
    /// (downward closed automatically).
    pub fn from_joint(space: VariableSpace, joint: &[f64], supports: &[Vec<usize>]) -> Result<PseudoDistribution> {
        let all: Vec<usize> = (0..space.num_vars()).collect();
        let full = Table::new(all.clone(), space.radices(&all), joint.to_vec());
        let closed = relax::downward_closure(space.num_vars(), supports.iter().cloned());
        let tables = closed.into_iter().map(|s| full.marginal(&s)).collect();
        PseudoDistribution::from_tables(space, tables)
    }

    /// Product of the given per-variable marginals, with tables on every
    /// support of size at most the degree.
    pub fn product(space: VariableSpace, marginals: &[Vec<f64>]) -> Result<PseudoDistribution> {
        let n = space.num_vars();
        if marginals.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: marginals.len(),
            });
        }
        let supports = relax::all_supports(n, space.degree());
        let tables = supports
            .into_iter()
            .map(|s| {
                let radices = space.radices(&s);
                let mut t = Table::zeros(s.clone(), radices);
                let mut digits = vec![0; s.len()];
                for idx in 0..t.len() {
                    t.digits_into(idx, &mut digits);
                    t.probs[idx] = s.iter().zip(&digits).map(|(&v, &d)| marginals[v][d]).product();
                }
                t
            })
            .collect();
        PseudoDistribution::from_tables(space, tables)
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn num_vars(&self) -> usize {
        self.space.num_vars()
    }

    pub fn degree(&self) -> usize {
        self.space.degree()
    }

    pub fn conditioned_on(&self) -> &[(usize, Vec<f64>)] {
        &self.conditioned_on
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn table(&self, support: &[usize]) -> Option<&Table> {
        self.tables.get(support)
    }

    pub fn has_table(&self, support: &[usize]) -> bool {
        self.tables.contains_key(support)
    }

    /// Singleton marginal of variable `i`.
    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.tables[&vec![i]].probs
    }

    /// The table on `support`, marginalized from the smallest stored superset.
    pub fn local(&self, support: &[usize]) -> Result<Table> {
        if let Some(t) = self.tables.get(support) {
            return Ok(t.clone());
        }
        if support.is_empty() {
            return Ok(Table::new(Vec::new(), Vec::new(), vec![1.0]));
        }
        self.tables
            .values()
            .filter(|t| support.iter().all(|v| t.position(*v).is_some()))
            .min_by_key(|t| t.len())
            .map(|t| t.marginal(support))
            .ok_or_else(|| Error::MissingTable(support.to_vec()))
    }

    /// Largest disagreement between any stored table and its stored
    /// immediate subsets.
    pub fn consistency_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for t in self.tables.values() {
            if t.support.len() < 2 {
                continue;
            }
            for d in 0..t.support.len() {
                let mut sub = t.support.clone();
                sub.remove(d);
                if let Some(s) = self.tables.get(&sub) {
                    gap = gap.max(t.marginal(&sub).max_abs_diff(s));
                }
            }
        }
        gap
    }

    /// Indices of variables whose marginal is not a point mass.
    pub fn free_vars(&self) -> Vec<usize> {
        (0..self.num_vars())
            .filter(|&i| self.marginal(i).iter().filter(|&&p| p > ZERO_PROB).count() > 1)
            .collect()
    }

    /// JSON dump of every table, for regression fixtures.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "degree": self.degree(),
            "conditioned_on": self.conditioned_on,
            "alphabets": (0..self.num_vars())
                .map(|i| self.space.alphabet(i).points().map(<[f64]>::to_vec).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "tables": self.tables.values().collect::<Vec<_>>(),
        })
    }
}

/// Pseudo-expectation of a junta.
pub fn pe(mu: &PseudoDistribution, f: &Junta) -> Result<f64> {
    if f.support().is_empty() {
        return Ok(f.eval(&[]));
    }
    let t = mu.local(f.support())?;
    let values = f.tabulate(mu.space(), &t.radices);
    Ok(t.probs.iter().zip(&values).map(|(p, v)| p * v).sum())
}

/// Conditions on `x_i` taking the value with symbol `s`.
pub fn condition(mu: &PseudoDistribution, i: usize, s: usize) -> Result<PseudoDistribution> {
    let degree = mu.degree();
    if degree < 2 {
        return Err(Error::DegreeExhausted(degree));
    }
    let prob = mu.marginal(i).get(s).copied().unwrap_or(0.0);
    if !(prob > ZERO_PROB) {
        return Err(Error::ZeroProbabilityEvent(prob));
    }
    let space = mu.space.restrict(i, s).with_degree(degree - 1);
    let mut tables = BTreeMap::new();
    for support in mu.tables.keys() {
        let mut ext = support.clone();
        if let Err(pos) = ext.binary_search(&i) {
            ext.insert(pos, i);
        }
        let Some(source) = mu.tables.get(&ext) else {
            continue;
        };
        let ipos = source.position(i).expect("extension contains i");
        let keep: Vec<usize> = support.iter().map(|v| source.position(*v).unwrap()).collect();
        let radices = space.radices(support);
        let mut out = Table::zeros(support.clone(), radices);
        let mut digits = vec![0; source.support.len()];
        let mut mass = 0.0;
        for (idx, &p) in source.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            source.digits_into(idx, &mut digits);
            if digits[ipos] != s {
                continue;
            }
            let j = keep
                .iter()
                .zip(&support[..])
                .zip(&out.radices)
                .fold(0, |acc, ((&q, &v), &r)| acc * r + if v == i { 0 } else { digits[q] });
            out.probs[j] += p;
            mass += p;
        }
        let denom = if mass > 0.0 { mass } else { prob };
        for p in &mut out.probs {
            *p /= denom;
        }
        tables.insert(support.clone(), out);
    }
    let mut conditioned_on = mu.conditioned_on.clone();
    conditioned_on.push((i, mu.space.point(i, s).to_vec()));
    Ok(PseudoDistribution {
        space,
        tables,
        conditioned_on,
    })
}

/// Conditions sequentially on `(variable, symbol)` pairs. Symbols refer to
/// the alphabets of `mu`; pinned variables keep symbol 0 afterwards.
pub fn condition_all(mu: &PseudoDistribution, fixings: &[(usize, usize)]) -> Result<PseudoDistribution> {
    let mut cur = mu.clone();
    for &(i, s) in fixings {
        // after an earlier pin on the same variable the alphabet has one symbol
        let sym = if cur.space.size(i) == 1 && mu.space.size(i) > 1 { 0 } else { s };
        cur = condition(&cur, i, sym)?;
    }
    Ok(cur)
}

/// Draws a joint assignment (one symbol per support variable) from the
/// local distribution on `support`.
pub fn sample_local<R: Rng + ?Sized>(mu: &PseudoDistribution, support: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    let t = mu.local(support)?;
    let idx = sample_index(&t.probs, rng);
    Ok(t.digits(idx))
}

/// Inverse-CDF draw from unnormalized nonnegative weights.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
