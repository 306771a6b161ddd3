//! Entrywise ℓp rank-one approximation: norm-grid loop, Sherali-Adams LP
//! with per-monomial norm constraints, conditioning on v-variables and
//! independent rounding. Also an alternating-minimization baseline.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::emv::GridChoice;
use crate::error::{Error, Result};
use crate::grid::{build_symmetric_grid, build_uniform_grid, Grid};
use crate::instance::{lra_objective, LraInstance, RankOne};
use crate::lp::{solve, LpStatus, Relation};
use crate::pseudodist::{build_sa_relaxation, pe, Alphabet, Junta, PeConstraint, PseudoDistribution, SupportPlan, VariableSpace};
use crate::rounding::{condition_and_round, sample_distinct, select_seed, subsets, task_rng, PotentialWeights, RoundingReport, SeedStrategy};

/// Which `(s_u, s_v)` cells of the norm grid to solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NormLoop {
    /// `count` evenly spaced balanced cells `s_u = s_v`. Odd counts include
    /// the midpoint `s_u = s_v = √N`, the balanced norms of an exact
    /// factorization.
    Diagonal(usize),
    /// `count` random cells of `S × S`.
    Sample(usize),
    /// Every cell of `S × S`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LraParams {
    pub eps: f64,
    /// Polynomial degree of the relaxation (defaults to `2p`).
    pub degree: Option<usize>,
    /// Seed strategy over the v-indices (greedy is not supported here).
    pub seed: SeedStrategy,
    pub repeats: usize,
    pub norm_loop: NormLoop,
    pub rng_seed: u64,
    /// `None` selects the step-`(ε^p/n²)·N^{1/(2p)}` lattice on
    /// `±N^{1/(2p)}` with `N = ‖A‖_p^p`.
    pub grid: Option<GridChoice>,
    /// Cap on the LP variables of one cell; larger relaxations fail with
    /// `TooLarge` instead of being attempted.
    pub max_lp_vars: usize,
}

impl Default for LraParams {
    fn default() -> Self {
        LraParams {
            eps: 0.5,
            degree: None,
            seed: SeedStrategy::sampled(1),
            repeats: 25,
            norm_loop: NormLoop::Diagonal(17),
            rng_seed: 0,
            grid: None,
            max_lp_vars: 200_000,
        }
    }
}

impl LraParams {
    pub fn poly_degree(&self, p: u32) -> usize {
        self.degree.unwrap_or(2 * p as usize)
    }

    pub fn validate(&self, p: u32) -> Result<()> {
        if p < 2 || p % 2 != 0 {
            return Err(Error::OddP(p));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::BadEpsilon(self.eps));
        }
        let t = self.poly_degree(p);
        let needed = p as usize + self.seed.size();
        if t < needed {
            return Err(Error::DegreeTooLow { degree: t, needed });
        }
        if self.seed.needs_mu() {
            return Err(Error::InvalidParameter("greedy seeds are not supported for rank-one approximation".into()));
        }
        Ok(())
    }
}

/// The norm-value set `S`: step `(ε^p/n³)·√N` on `[0, 2√N]`, values above
/// `2^p·√N` dropped.
pub fn build_norm_grid(inst: &LraInstance, eps: f64) -> Result<Grid> {
    let root = inst.norm_p().sqrt();
    if root == 0.0 {
        return Grid::custom([0.0]);
    }
    let n = inst.n().max(1) as f64;
    let step = eps.powi(inst.p() as i32) / (n * n * n) * root;
    let hi = 2f64.min(2f64.powi(inst.p() as i32)) * root;
    build_uniform_grid(0.0, hi, step)
}

/// The coordinate alphabet `Σ`: step `(ε^p/n²)·N^{1/(2p)}` on
/// `±N^{1/(2p)}`, `2·⌈n²/ε^p⌉ + 1` values.
pub fn build_lra_grid(inst: &LraInstance, eps: f64) -> Result<Grid> {
    let half = inst.norm_p().powf(1.0 / (2.0 * inst.p() as f64));
    if half == 0.0 {
        return Grid::custom([0.0]);
    }
    let n = inst.n().max(1) as f64;
    build_symmetric_grid(half, eps.powi(inst.p() as i32) / (n * n) * half)
}

fn lra_alphabet(inst: &LraInstance, params: &LraParams) -> Result<Grid> {
    match &params.grid {
        None => build_lra_grid(inst, params.eps),
        Some(GridChoice::Custom(values)) => Grid::custom(values.iter().copied()),
        Some(GridChoice::Uniform { step, half_width }) => {
            let half = half_width.unwrap_or_else(|| inst.norm_p().powf(1.0 / (2.0 * inst.p() as f64)));
            build_symmetric_grid(half, *step)
        }
        Some(GridChoice::Geometric) => Err(Error::InvalidParameter("rank-one approximation uses a uniform grid".into())),
    }
}

/// The `(s_u, s_v)` cells visited by the norm loop.
pub fn norm_cells(norms: &Grid, policy: &NormLoop, rng_seed: u64) -> Vec<(f64, f64)> {
    let s = norms.values();
    match *policy {
        NormLoop::Full => s.iter().flat_map(|&a| s.iter().map(move |&b| (a, b))).collect(),
        NormLoop::Diagonal(count) => {
            let count = count.max(1).min(s.len());
            let mut idx: Vec<usize> = (0..count)
                .map(|c| {
                    if count == 1 {
                        s.len() / 2
                    } else {
                        (c * (s.len() - 1) + (count - 1) / 2) / (count - 1)
                    }
                })
                .collect();
            idx.dedup();
            idx.into_iter().map(|i| (s[i], s[i])).collect()
        }
        NormLoop::Sample(count) => {
            let total = s.len() * s.len();
            sample_distinct(total, count, &mut task_rng(rng_seed, u64::MAX))
                .into_iter()
                .map(|c| (s[c / s.len()], s[c % s.len()]))
                .collect()
        }
    }
}

/// Junta `y^c · x^p` on the variables `y` and `x` (which may coincide).
fn monomial_times_power(y: usize, c: u32, x: usize, p: u32) -> Junta {
    let (c, p) = (c as i32, p as i32);
    if y == x {
        return Junta::new(vec![x], move |z| z[0][0].powi(c + p));
    }
    if y < x {
        Junta::new(vec![y, x], move |z| z[0][0].powi(c) * z[1][0].powi(p))
    } else {
        Junta::new(vec![x, y], move |z| z[1][0].powi(c) * z[0][0].powi(p))
    }
}

/// Norm constraints `Σ_{x∈block} pE[r·x^p] = s·pE[r]` for `r = 1` and
/// `r = y^c`, `1 ≤ c ≤ t − p`, over every variable `y`.
fn norm_constraints(block: &[usize], total_vars: usize, s: f64, p: u32, t: usize, name: &str) -> Vec<PeConstraint> {
    let mut out = vec![PeConstraint {
        terms: block
            .iter()
            .map(|&x| (Junta::new(vec![x], move |z| z[0][0].powi(p as i32)), 1.0))
            .collect(),
        relation: Relation::Eq,
        rhs: s,
        name: format!("{name}-norm"),
    }];
    for c in 1..=(t.saturating_sub(p as usize)) as u32 {
        for y in 0..total_vars {
            let mut terms: Vec<(Junta, f64)> = block.iter().map(|&x| (monomial_times_power(y, c, x, p), 1.0)).collect();
            terms.push((Junta::new(vec![y], move |z| z[0][0].powi(c as i32)), -s));
            out.push(PeConstraint {
                terms,
                relation: Relation::Eq,
                rhs: 0.0,
                name: format!("{name}-y{y}^{c}"),
            });
        }
    }
    out
}

/// Per-cell outcome of the norm loop.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub s_u: f64,
    pub s_v: f64,
    /// `None` when the cell's relaxation is infeasible or the solver broke
    /// down on it.
    pub lp_value: Option<f64>,
    /// Solver breakdown message for a skipped cell.
    pub failure: Option<String>,
    /// `|Σ_ij pE[u_i^p v_j^p] − s_u s_v|` (checked when `t ≥ 2p`).
    pub identity_gap: Option<f64>,
    pub rounded: Option<RoundingReport>,
}

#[derive(Debug, Clone)]
pub struct LraResult {
    pub rank_one: RankOne,
    pub cells: Vec<CellReport>,
    pub grid: Grid,
    pub norms: Grid,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

/// Local tables on each seed set extended by two further variables. With
/// only pairs, the table of two v-variables is not tied to the objective
/// and conditioning on one of them can fix the other to the wrong sign.
fn seed_plan(num_vars: usize, seeds: &[Vec<usize>]) -> SupportPlan {
    let mut out = Vec::new();
    for seed in seeds {
        for a in (0..num_vars).filter(|a| !seed.contains(a)) {
            for b in (a + 1..num_vars).filter(|b| !seed.contains(b)) {
                let mut t = seed.clone();
                t.extend([a, b]);
                t.sort_unstable();
                out.push(t);
            }
        }
    }
    SupportPlan::Closure(out)
}

/// Relaxation of one cell: returns the LP value (in objective units) and
/// the decoded pseudo-distribution over `(u_1..u_n, v_1..v_m)`.
pub fn solve_lra_cell(
    inst: &LraInstance,
    params: &LraParams,
    grid: &Grid,
    s_u: f64,
    s_v: f64,
    seeds: Option<&[Vec<usize>]>,
) -> Result<Option<(f64, PseudoDistribution)>> {
    let (n, m, p) = (inst.n(), inst.m(), inst.p());
    let t = params.poly_degree(p);
    let seed_size = params.seed.size();
    let space = VariableSpace::uniform(n + m, Alphabet::from_grid(grid, 1), seed_size + 2);
    let scale = if inst.norm_p() > 0.0 { 1.0 / inst.norm_p() } else { 1.0 };
    let mut objective = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let a = inst.a(i, j);
            let pi = p as i32;
            objective.push((Junta::new(vec![i, n + j], move |z| (a - z[0][0] * z[1][0]).powi(pi)), scale));
        }
    }
    let us: Vec<usize> = (0..n).collect();
    let vs: Vec<usize> = (n..n + m).collect();
    let mut cons = norm_constraints(&us, n + m, s_u, p, t, "u");
    cons.extend(norm_constraints(&vs, n + m, s_v, p, t, "v"));
    let all;
    let seeds = match seeds {
        Some(s) => s,
        None => {
            all = subsets(m, seed_size)
                .into_iter()
                .map(|s| s.into_iter().map(|j| n + j).collect())
                .collect::<Vec<_>>();
            &all
        }
    };
    let q = grid.len() as f64;
    let vars = seeds.len() as f64 * binomial(n + m - seed_size, 2) * q.powi(seed_size as i32 + 2)
        + binomial(n + m, 2) * q * q;
    if vars > params.max_lp_vars as f64 {
        return Err(Error::TooLarge(format!(
            "about {vars:.0} LP variables for an alphabet of {} values (limit {}); pass a coarser grid",
            grid.len(),
            params.max_lp_vars
        )));
    }
    let relax = build_sa_relaxation(&space, &objective, &cons, &[], &seed_plan(n + m, seeds))?;
    let sol = solve(&relax.lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some((sol.objective / scale, relax.layout.decode(&sol)?))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// `Σ_ij pE[u_i^p v_j^p]`.
pub fn cross_moment(mu: &PseudoDistribution, n: usize, m: usize, p: u32) -> Result<f64> {
    let pi = p as i32;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += pe(mu, &Junta::new(vec![i, n + j], move |z| z[0][0].powi(pi) * z[1][0].powi(pi)))?;
        }
    }
    Ok(total)
}

/// Runs the norm-grid loop and returns the best rounded factors.
pub fn solve_lra(inst: &LraInstance, params: &LraParams) -> Result<LraResult> {
    params.validate(inst.p())?;
    let (n, m, p) = (inst.n(), inst.m(), inst.p());
    let grid = lra_alphabet(inst, params)?;
    let norms = build_norm_grid(inst, params.eps)?;
    let cells = norm_cells(&norms, &params.norm_loop, params.rng_seed);
    let col_weight: Vec<f64> = (0..m).map(|j| (0..n).map(|i| inst.a(i, j).powi(p as i32)).sum()).collect();
    let check_identity = params.poly_degree(p) >= 2 * p as usize;
    let outcomes: Vec<(CellReport, Option<(Vec<f64>, Vec<f64>)>)> = cells
        .par_iter()
        .enumerate()
        .map(|(c, &(s_u, s_v))| {
            let stream = 1 + c as u64;
            let mut rng = task_rng(params.rng_seed, stream);
            let seeds: Vec<Vec<usize>> = select_seed(&params.seed, &col_weight, None, PotentialWeights::new(1.0, 2), &mut rng)?
                .into_iter()
                .map(|s| s.into_iter().map(|j| n + j).collect())
                .collect();
            let skipped = |failure: Option<String>| {
                Ok((
                    CellReport {
                        s_u,
                        s_v,
                        lp_value: None,
                        failure,
                        identity_gap: None,
                        rounded: None,
                    },
                    None,
                ))
            };
            let (lp_value, mu) = match solve_lra_cell(inst, params, &grid, s_u, s_v, Some(&seeds)) {
                Ok(Some(found)) => found,
                Ok(None) => return skipped(None),
                Err(Error::NumericalFailure(msg)) => return skipped(Some(msg)),
                Err(e) => return Err(e),
            };
            let identity_gap = if check_identity {
                let gap = (cross_moment(&mu, n, m, p)? - s_u * s_v).abs();
                if gap > 1e-7 * (s_u * s_v).max(1.0) {
                    return Err(Error::NumericalFailure(format!(
                        "norm identity violated by {gap:e} at ({s_u}, {s_v})"
                    )));
                }
                Some(gap)
            } else {
                None
            };
            let eval = |x: &[Vec<f64>]| {
                let u: Vec<f64> = x[..n].iter().map(|z| z[0]).collect();
                let v: Vec<f64> = x[n..].iter().map(|z| z[0]).collect();
                lra_objective(inst, &u, &v).unwrap_or(f64::INFINITY)
            };
            let mut best: Option<(Vec<Vec<f64>>, RoundingReport)> = None;
            for seed in &seeds {
                let (pts, mut report) = condition_and_round(&mu, seed, eval, params.repeats, &mut rng)?;
                report.lp_value = lp_value;
                report.rng_seed = params.rng_seed;
                report.rng_stream = stream;
                if best.as_ref().is_none_or(|b| report.objective < b.1.objective) {
                    best = Some((pts, report));
                }
            }
            let (pts, report) = best.expect("at least one seed set");
            let u = pts[..n].iter().map(|z| z[0]).collect();
            let v = pts[n..].iter().map(|z| z[0]).collect();
            Ok((
                CellReport {
                    s_u,
                    s_v,
                    lp_value: Some(lp_value),
                    failure: None,
                    identity_gap,
                    rounded: Some(report),
                },
                Some((u, v)),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = outcomes
        .iter()
        .enumerate()
        .filter_map(|(c, (r, f))| Some((c, r.rounded.as_ref()?.objective, f.as_ref()?)))
        .fold(None::<(usize, f64, &(Vec<f64>, Vec<f64>))>, |acc, x| match acc {
            Some(a) if a.1 <= x.1 => Some(a),
            _ => Some(x),
        })
        .ok_or_else(|| match outcomes.iter().find_map(|o| o.0.failure.clone()) {
            Some(msg) => Error::NumericalFailure(msg),
            None => Error::Infeasible,
        })?;
    let (c, _, (u, v)) = best;
    let mut rank_one = RankOne::new(inst, u.clone(), v.clone())?;
    let cell = &outcomes[c].0;
    let report = cell.rounded.as_ref().expect("feasible cell");
    let prov = &mut rank_one.provenance;
    prov.insert("algorithm".into(), json!("lra"));
    prov.insert("s_u".into(), json!(cell.s_u));
    prov.insert("s_v".into(), json!(cell.s_v));
    prov.insert("seed".into(), json!(report.seed.iter().map(|x| x - n).collect::<Vec<_>>()));
    prov.insert("repetition".into(), json!(report.repetition));
    prov.insert("rng_seed".into(), json!(params.rng_seed));
    prov.insert("rng_stream".into(), json!(report.rng_stream));
    prov.insert("lp_value".into(), json!(cell.lp_value));
    prov.insert("grid_size".into(), json!(grid.len()));
    prov.insert("cells".into(), json!(outcomes.len()));
    prov.insert(
        "cells_failed".into(),
        json!(outcomes.iter().filter(|o| o.0.failure.is_some()).count()),
    );
    prov.insert("params".into(), serde_json::to_value(params)?);
    Ok(LraResult {
        rank_one,
        cells: outcomes.into_iter().map(|o| o.0).collect(),
        grid,
        norms,
    })
}

/// Minimizer of the convex `x ↦ Σ_j (a_j − x·b_j)^p`: the root of its
/// increasing derivative, bracketed by the hull of `a_j / b_j`, found by
/// bisection and polished by Newton steps.
pub fn best_scalar(a: &[f64], b: &[f64], p: u32) -> f64 {
    let pairs: Vec<(f64, f64)> = a.iter().zip(b).filter(|(_, &bj)| bj != 0.0).map(|(&x, &y)| (x, y)).collect();
    if pairs.is_empty() {
        return 0.0;
    }
    let pm1 = p as i32 - 1;
    let deriv = |x: f64| -> f64 { -pairs.iter().map(|&(aj, bj)| bj * (aj - x * bj).powi(pm1)).sum::<f64>() };
    let second = |x: f64| -> f64 {
        (p as f64 - 1.0) * pairs.iter().map(|&(aj, bj)| bj * bj * (aj - x * bj).powi(pm1 - 1)).sum::<f64>()
    };
    let ratios = pairs.iter().map(|&(aj, bj)| aj / bj);
    let mut lo = ratios.clone().fold(f64::INFINITY, f64::min);
    let mut hi = ratios.fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..5 {
        let h = second(x);
        if h <= 0.0 {
            break;
        }
        let next = x - deriv(x) / h;
        if !(next >= lo - 1e-12 && next <= hi + 1e-12) || (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
        x = next;
    }
    x
}

/// Alternating minimization from a given start. Returns the factors and
/// the residual after every half-step.
pub fn alternate_from(inst: &LraInstance, mut u: Vec<f64>, mut v: Vec<f64>) -> Result<(RankOne, Vec<f64>)> {
    let (n, m, p) = (inst.n(), inst.m(), inst.p());
    let mut history = vec![lra_objective(inst, &u, &v)?];
    for _ in 0..1000 {
        let before = *history.last().expect("nonempty");
        for (i, ui) in u.iter_mut().enumerate() {
            let row: Vec<f64> = (0..m).map(|j| inst.a(i, j)).collect();
            *ui = best_scalar(&row, &v, p);
        }
        history.push(lra_objective(inst, &u, &v)?);
        for (j, vj) in v.iter_mut().enumerate() {
            let col: Vec<f64> = (0..n).map(|i| inst.a(i, j)).collect();
            *vj = best_scalar(&col, &u, p);
        }
        let after = lra_objective(inst, &u, &v)?;
        history.push(after);
        if before - after <= 1e-10 * before.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((RankOne::new(inst, u, v)?, history))
}

/// Top singular pair of `A`, scaled as `(√σ·u, √σ·v)`.
pub fn spectral_rank_one(inst: &LraInstance) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (inst.n(), inst.m());
    let a = DMatrix::from_fn(n, m, |i, j| inst.a(i, j));
    let svd = a.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let (k, &sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &0.0));
    let r = sigma.sqrt();
    ((0..n).map(|i| r * u[(i, k)]).collect(), (0..m).map(|j| r * vt[(k, j)]).collect())
}

/// Best of `restarts` alternating runs; restart 0 starts from the spectral
/// rank-one solution, the others from Gaussian vectors.
pub fn lra_alternating_baseline<R: Rng + ?Sized>(inst: &LraInstance, restarts: usize, rng: &mut R) -> Result<RankOne> {
    let scale = inst.norm_p().powf(1.0 / (2.0 * inst.p() as f64)).max(1e-12);
    let mut best: Option<RankOne> = None;
    for r in 0..restarts.max(1) {
        let (u0, v0) = if r == 0 {
            spectral_rank_one(inst)
        } else {
            let mut g = || scale * Distribution::<f64>::sample(&StandardNormal, rng) / (inst.n().max(inst.m()) as f64).sqrt();
            ((0..inst.n()).map(|_| g()).collect(), (0..inst.m()).map(|_| g()).collect())
        };
        let (cand, _) = alternate_from(inst, u0, v0)?;
        if best.as_ref().is_none_or(|b| cand.objective < b.objective) {
            best = Some(cand);
        }
    }
    let mut out = best.expect("at least one restart");
    out.provenance.insert("algorithm".into(), json!("alternating"));
    Ok(out)
}
