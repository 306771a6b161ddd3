//! Weighted k-EMV pipeline for regular weight matrices, degree-2 moment
//! cuts, and graph diagnostics (regularity, conductance, multi-way
//! conductance by brute force).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::emv::{choose_plan, GridChoice, SUPPORT_BUDGET};
use crate::error::{Error, Result};
use crate::grid::{build_symmetric_grid, Grid};
use crate::instance::{dist, weighted_objective, Embedding, WeightedEmvInstance, REGULARITY_TOL};
use crate::lp::{run_cut_loop, LpStatus, Relation, Row};
use crate::pseudodist::{build_sa_relaxation, Alphabet, Junta, Layout, VariableSpace};
use crate::rounding::{condition_and_round, select_seed, task_rng, PotentialWeights, RoundingReport, SeedStrategy};

/// Returns δ when every row of `w` sums to `δ·n` (within 1e-9).
pub fn check_regularity(w: &[Vec<f64>]) -> Result<f64> {
    let n = w.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty weight matrix".into()));
    }
    let sums: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
    // the target is the most common row sum, so a single bad row is named
    let target = sums
        .iter()
        .copied()
        .max_by_key(|&s| sums.iter().filter(|&&t| (t - s).abs() <= REGULARITY_TOL).count())
        .unwrap_or(0.0);
    let rows: Vec<usize> = (0..n).filter(|&i| (sums[i] - target).abs() > REGULARITY_TOL).collect();
    if !rows.is_empty() {
        return Err(Error::NotRegular { rows });
    }
    Ok(target / n as f64)
}

/// Clipping constant of the default grid: the range is at most
/// `c·√weighted_mean_sq/ε`.
pub const CLIP_CONSTANT: f64 = 32.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WemvParams {
    pub eps: f64,
    pub degree: usize,
    pub seed: SeedStrategy,
    pub repeats: usize,
    pub rng_seed: u64,
    /// `None` selects the step-`ε√(wms/k)` lattice over `[−nΔ, nΔ]`.
    pub grid: Option<GridChoice>,
    /// Clip the default grid range to `32·√wms/ε`.
    pub clip: bool,
    pub psd_cuts: bool,
    pub max_cuts: usize,
    pub support_budget: usize,
}

impl Default for WemvParams {
    fn default() -> Self {
        WemvParams {
            eps: 0.25,
            degree: 3,
            seed: SeedStrategy::sampled(2),
            repeats: 25,
            rng_seed: 0,
            grid: None,
            clip: true,
            psd_cuts: false,
            max_cuts: 50,
            support_budget: SUPPORT_BUDGET,
        }
    }
}

impl WemvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::BadEpsilon(self.eps));
        }
        let needed = self.seed.size() + 1;
        if self.degree < needed.max(2) {
            return Err(Error::DegreeTooLow {
                degree: self.degree,
                needed: needed.max(2),
            });
        }
        Ok(())
    }
}

/// The coordinate grid of the weighted relaxation.
pub fn wemv_grid(inst: &WeightedEmvInstance, params: &WemvParams) -> Result<Grid> {
    let base = inst.base();
    let wms = inst.weighted_mean_sq();
    match &params.grid {
        Some(GridChoice::Custom(values)) => Grid::custom(values.iter().copied()),
        Some(GridChoice::Uniform { step, half_width }) => {
            let half = half_width.unwrap_or(base.n() as f64 * base.delta());
            build_symmetric_grid(half, *step)
        }
        Some(GridChoice::Geometric) => Err(Error::InvalidParameter(
            "the weighted pipeline uses a uniform grid".into(),
        )),
        None => {
            if wms == 0.0 {
                return Grid::custom([0.0]);
            }
            let step = params.eps * (wms / base.k() as f64).sqrt();
            let mut half = base.n() as f64 * base.delta();
            if params.clip {
                half = half.min(CLIP_CONSTANT * wms.sqrt() / params.eps);
            }
            build_symmetric_grid(half, step)
        }
    }
}

/// Objective juntas `Σ_{i<j} (2 w_ij / Σw) (d_ij − ‖x_i − x_j‖)²`.
pub fn weighted_objective_juntas(inst: &WeightedEmvInstance) -> Vec<(Junta, f64)> {
    let base = inst.base();
    let n = base.n();
    let total: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| inst.w(i, j)).sum();
    if total == 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = inst.w(i, j);
            if w == 0.0 {
                continue;
            }
            let d = base.d(i, j);
            out.push((
                Junta::new(vec![i, j], move |p| {
                    let r = d - dist(p[0], p[1]);
                    r * r
                }),
                2.0 * w / total,
            ));
        }
    }
    out
}

/// A symmetric matrix whose entries are affine functions of the LP
/// variables: entry `(a, b)` equals `Σ coef·x_var + constant`.
#[derive(Debug, Clone)]
pub struct AffineMatrix {
    dim: usize,
    entries: Vec<(Vec<(usize, f64)>, f64)>,
}

impl AffineMatrix {
    /// # Panics
    /// If `entries` does not have `dim²` elements.
    pub fn new(dim: usize, entries: Vec<(Vec<(usize, f64)>, f64)>) -> AffineMatrix {
        assert_eq!(entries.len(), dim * dim, "affine matrix needs dim² entries");
        AffineMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| {
            let (form, c) = &self.entries[a * self.dim + b];
            c + form.iter().map(|&(v, w)| w * x[v]).sum::<f64>()
        })
    }

    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        SymmetricEigen::new(self.eval(x))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// The cut `vᵀ M v ≥ 0` for the eigenvector of the smallest eigenvalue,
    /// when that eigenvalue is below `-tol`.
    pub fn cut(&self, x: &[f64], tol: f64) -> Option<Row> {
        let eig = SymmetricEigen::new(self.eval(x));
        let (idx, &lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))?;
        if lambda >= -tol {
            return None;
        }
        let v = eig.eigenvectors.column(idx);
        let mut coeffs = Vec::new();
        let mut constant = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                let s = v[a] * v[b];
                if s == 0.0 {
                    continue;
                }
                let (form, c) = &self.entries[a * self.dim + b];
                constant += s * c;
                coeffs.extend(form.iter().map(|&(var, w)| (var, s * w)));
            }
        }
        Some(Row::new(coeffs, Relation::Ge, -constant, format!("psd{lambda:.3e}")))
    }
}

/// Degree-2 moment matrix `pE[(1, x)(1, x)ᵀ]` over all `n·k` coordinates,
/// expressed in the LP variables of `layout`.
pub fn moment_matrix(layout: &Layout, n: usize, k: usize) -> Result<AffineMatrix> {
    let dim = 1 + n * k;
    let mut entries = vec![(Vec::new(), 0.0); dim * dim];
    entries[0] = (Vec::new(), 1.0);
    let set = |entries: &mut Vec<(Vec<(usize, f64)>, f64)>, a: usize, b: usize, form: Vec<(usize, f64)>| {
        entries[a * dim + b] = (form.clone(), 0.0);
        entries[b * dim + a] = (form, 0.0);
    };
    for i in 0..n {
        for c in 0..k {
            let a = 1 + i * k + c;
            set(&mut entries, 0, a, layout.linear_form(&Junta::new(vec![i], move |p| p[0][c]))?);
            for c2 in c..k {
                let f = Junta::new(vec![i], move |p| p[0][c] * p[0][c2]);
                set(&mut entries, a, 1 + i * k + c2, layout.linear_form(&f)?);
            }
            for j in i + 1..n {
                for c2 in 0..k {
                    let f = Junta::new(vec![i, j], move |p| p[0][c] * p[1][c2]);
                    set(&mut entries, a, 1 + j * k + c2, layout.linear_form(&f)?);
                }
            }
        }
    }
    Ok(AffineMatrix::new(dim, entries))
}

#[derive(Debug, Clone)]
pub struct WemvResult {
    pub embedding: Embedding,
    pub reports: Vec<RoundingReport>,
    pub lp_value: f64,
    pub cuts_added: usize,
    /// Smallest eigenvalue of the final moment matrix (when cuts ran).
    pub min_moment_eigenvalue: Option<f64>,
    pub grid: Grid,
}

/// Weighted pipeline: Sherali-Adams LP on the weighted objective (with
/// optional eigenvector cuts), conditioning on the seed set, independent
/// rounding and best-of repetition.
pub fn solve_wemv(inst: &WeightedEmvInstance, params: &WemvParams) -> Result<WemvResult> {
    params.validate()?;
    let base = inst.base();
    let (n, k) = (base.n(), base.k());
    let grid = wemv_grid(inst, params)?;
    let space = VariableSpace::uniform(n, Alphabet::from_grid(&grid, k), params.degree);
    let mut rng = task_rng(params.rng_seed, 0);
    let importance = inst.row_importance();
    let weights = PotentialWeights::new(inst.weighted_mean_sq(), space.max_size());
    let pre_seeds = if params.seed.needs_mu() {
        None
    } else {
        Some(select_seed(&params.seed, &importance, None, weights, &mut rng)?)
    };
    let plan = choose_plan(&space, params.seed.size(), pre_seeds.as_deref(), params.support_budget);
    let relax = build_sa_relaxation(&space, &weighted_objective_juntas(inst), &[], &[], &plan)?;
    let (solution, cuts_added, min_eig, breakdown) = if params.psd_cuts {
        let m = moment_matrix(&relax.layout, n, k)?;
        let out = run_cut_loop(&relax.lp, |sol| m.cut(&sol.values, 1e-9), params.max_cuts)?;
        let eig = out.solution.is_optimal().then(|| m.min_eigenvalue(&out.solution.values));
        (out.solution, out.cuts_added, eig, out.solver_breakdown)
    } else {
        (crate::lp::solve(&relax.lp)?, 0, None, false)
    };
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let mu = relax.layout.decode(&solution)?;
    let seeds = match pre_seeds {
        Some(s) => s,
        None => select_seed(&params.seed, &importance, Some(&mu), weights, &mut rng)?,
    };
    let eval = |pts: &[Vec<f64>]| weighted_objective(inst, pts).unwrap_or(f64::INFINITY);
    let outcomes: Vec<(Vec<Vec<f64>>, RoundingReport)> = seeds
        .par_iter()
        .enumerate()
        .map(|(t, seed)| {
            let stream = 1 + t as u64;
            let mut rng = task_rng(params.rng_seed, stream);
            let (pts, mut report) = condition_and_round(&mu, seed, eval, params.repeats, &mut rng)?;
            report.lp_value = solution.objective;
            report.rng_seed = params.rng_seed;
            report.rng_stream = stream;
            Ok((pts, report))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.objective.total_cmp(&b.1 .1.objective).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one seed set");
    let mut embedding = Embedding::new_weighted(inst, outcomes[best].0.clone())?;
    let report = &outcomes[best].1;
    let prov = &mut embedding.provenance;
    prov.insert("algorithm".into(), json!("wemv"));
    prov.insert("seed".into(), json!(report.seed));
    prov.insert("repetition".into(), json!(report.repetition));
    prov.insert("rng_seed".into(), json!(params.rng_seed));
    prov.insert("rng_stream".into(), json!(report.rng_stream));
    prov.insert("lp_value".into(), json!(solution.objective));
    prov.insert("cuts_added".into(), json!(cuts_added));
    prov.insert("cut_loop_breakdown".into(), json!(breakdown));
    prov.insert("grid_size".into(), json!(grid.len()));
    prov.insert("params".into(), serde_json::to_value(params)?);
    Ok(WemvResult {
        embedding,
        reports: outcomes.into_iter().map(|o| o.1).collect(),
        lp_value: solution.objective,
        cuts_added,
        min_moment_eigenvalue: min_eig,
        grid,
    })
}

/// `φ(A) = w(A, Ā) / vol(A)` with `vol(A) = Σ_{i∈A} deg(i)`; 0 when the
/// volume vanishes.
pub fn conductance(w: &[Vec<f64>], set: &[usize]) -> f64 {
    let n = w.len();
    let mut inside = vec![false; n];
    for &i in set {
        inside[i] = true;
    }
    let mut cut = 0.0;
    let mut vol = 0.0;
    for &i in set {
        for j in 0..n {
            vol += w[i][j];
            if !inside[j] {
                cut += w[i][j];
            }
        }
    }
    if vol > 0.0 {
        cut / vol
    } else {
        0.0
    }
}

/// `ρ_G(k) = min over k disjoint nonempty sets of max_j φ(A_j)`, by
/// enumerating every labeling of the vertices with `{unused, 1..k}`.
pub fn multiway_conductance_bruteforce(w: &[Vec<f64>], kparts: usize) -> Result<f64> {
    let n = w.len();
    if n > 10 {
        return Err(Error::TooLarge(format!("brute-force conductance needs n <= 10, got {n}")));
    }
    if kparts == 0 || kparts > n {
        return Err(Error::InvalidParameter(format!("cannot place {kparts} disjoint sets on {n} vertices")));
    }
    let labels = kparts + 1;
    let total = labels.pow(n as u32);
    let deg: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
    let mut best = f64::INFINITY;
    let mut lab = vec![0usize; n];
    let mut cut = vec![0.0; kparts + 1];
    let mut vol = vec![0.0; kparts + 1];
    let mut count = vec![0usize; kparts + 1];
    for code in 0..total {
        let mut c = code;
        for slot in lab.iter_mut() {
            *slot = c % labels;
            c /= labels;
        }
        cut.iter_mut().for_each(|x| *x = 0.0);
        vol.iter_mut().for_each(|x| *x = 0.0);
        count.iter_mut().for_each(|x| *x = 0);
        for i in 0..n {
            count[lab[i]] += 1;
        }
        if count[1..].iter().any(|&c| c == 0) {
            continue;
        }
        for i in 0..n {
            let li = lab[i];
            if li == 0 {
                continue;
            }
            vol[li] += deg[i];
            for j in 0..n {
                if lab[j] != li {
                    cut[li] += w[i][j];
                }
            }
        }
        let worst = (1..=kparts)
            .map(|p| if vol[p] > 0.0 { cut[p] / vol[p] } else { 0.0 })
            .fold(0.0, f64::max);
        if worst < best {
            best = worst;
        }
    }
    Ok(best)
}

/// Random symmetric regular weight matrix: a positive combination of
/// `P + Pᵀ` over random derangements `P`, scaled so the largest entry is 1.
pub fn random_regular_weights<R: Rng + ?Sized>(n: usize, terms: usize, rng: &mut R) -> Vec<Vec<f64>> {
    assert!(n >= 2, "need at least two vertices");
    let mut w = vec![vec![0.0; n]; n];
    for _ in 0..terms.max(1) {
        let perm = loop {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(rng);
            if p.iter().enumerate().all(|(i, &j)| i != j) {
                break p;
            }
        };
        let c: f64 = rng.random_range(0.1..1.0);
        for (i, &j) in perm.iter().enumerate() {
            w[i][j] += c;
            w[j][i] += c;
        }
    }
    let max = w.iter().flatten().copied().fold(0.0, f64::max);
    for row in &mut w {
        for x in row.iter_mut() {
            *x /= max;
        }
    }
    w
}
