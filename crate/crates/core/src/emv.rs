//! End-to-end k-EMV pipeline: anchor loop, constrained Sherali-Adams LP,
//! conditioning, independent rounding and best-embedding selection.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{build_emv_grid, build_symmetric_grid, Grid};
use crate::instance::{emv_objective, Embedding, EmvInstance};
use crate::lp::{solve, LpStatus, Relation};
use crate::pseudodist::{
    build_sa_relaxation, Alphabet, Fixing, Junta, PeConstraint, PseudoDistribution, SaRelaxation, SupportPlan,
    VariableSpace,
};
use crate::rounding::{
    condition_and_round, sample_distinct, select_seed, subsets, task_rng, PotentialWeights, RoundingReport,
    SeedStrategy,
};

/// Ball constant of the anchored relaxation: `E_i ‖x_i‖² ≤ 6·mean_sq`.
pub const BALL_CONSTANT: f64 = 6.0;
/// Relative slack added to the ball constraint.
pub const BALL_SLACK: f64 = 1e-6;
/// Default cap on LP variables before falling back to the seed closure.
pub const SUPPORT_BUDGET: usize = 40_000;

/// Coordinate alphabet used by a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GridChoice {
    /// Geometric grid built from `eps`, `k`, the aspect ratio and `mean_sq`.
    Geometric,
    /// Symmetric lattice `{i·step}` covering the ball (or `half_width`).
    Uniform { step: f64, half_width: Option<f64> },
    /// Explicit values.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Anchors {
    All,
    Sample(usize),
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmvParams {
    pub eps: f64,
    pub degree: usize,
    pub seed: SeedStrategy,
    pub anchors: Anchors,
    pub repeats: usize,
    pub rng_seed: u64,
    pub grid: GridChoice,
    pub support_budget: usize,
}

impl Default for EmvParams {
    fn default() -> Self {
        EmvParams {
            eps: 0.25,
            degree: 3,
            seed: SeedStrategy::sampled(1),
            anchors: Anchors::Sample(4),
            repeats: 25,
            rng_seed: 0,
            grid: GridChoice::Geometric,
            support_budget: SUPPORT_BUDGET,
        }
    }
}

impl EmvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::BadEpsilon(self.eps));
        }
        let needed = self.seed.size() + 2;
        if self.degree < needed {
            return Err(Error::DegreeTooLow {
                degree: self.degree,
                needed,
            });
        }
        Ok(())
    }
}

/// Outcome of one anchored relaxation.
#[derive(Debug, Clone, Serialize)]
pub struct AnchorRun {
    pub anchor: usize,
    pub lp_value: Option<f64>,
    pub reports: Vec<RoundingReport>,
    #[serde(skip)]
    best: Option<(Vec<Vec<f64>>, f64)>,
}

#[derive(Debug, Clone)]
pub struct EmvResult {
    pub embedding: Embedding,
    pub runs: Vec<AnchorRun>,
    pub grid: Grid,
}

impl EmvResult {
    /// Minimum LP value over the feasible anchors.
    pub fn lp_value(&self) -> f64 {
        self.runs
            .iter()
            .filter_map(|r| r.lp_value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn reports(&self) -> impl Iterator<Item = &RoundingReport> {
        self.runs.iter().flat_map(|r| r.reports.iter())
    }
}

/// The alphabet grid of the anchored relaxation. Uniform and custom grids
/// are closed under differences so that anchoring loses no grid solution;
/// every grid is then clipped to the radius implied by the ball constraint.
pub fn emv_grid(inst: &EmvInstance, params: &EmvParams) -> Result<Grid> {
    let radius = (BALL_CONSTANT * (1.0 + BALL_SLACK) * inst.n() as f64 * inst.mean_sq()).sqrt();
    let grid = match &params.grid {
        GridChoice::Geometric => build_emv_grid(params.eps, inst.k(), inst.delta(), inst.mean_sq())?,
        GridChoice::Uniform { step, half_width } => {
            build_symmetric_grid(half_width.unwrap_or(radius), *step)?.difference_closure()
        }
        GridChoice::Custom(values) => Grid::custom(values.iter().copied())?.difference_closure(),
    };
    Ok(grid.clipped(radius))
}

/// Number of table entries of the full degree-`t` plan.
fn full_plan_size(sizes: &[usize], t: usize) -> f64 {
    // elementary symmetric sums e_1..e_t of the alphabet sizes
    let mut e = vec![0.0f64; t + 1];
    e[0] = 1.0;
    for &q in sizes {
        for r in (1..=t).rev() {
            e[r] += e[r - 1] * q as f64;
        }
    }
    e[1..].iter().sum()
}

/// Chooses the full plan when it fits the budget, else the closure of the
/// given seed sets (each extended by one variable). `None` seeds means all
/// sets of the strategy size.
pub(crate) fn choose_plan(space: &VariableSpace, seed_size: usize, seeds: Option<&[Vec<usize>]>, budget: usize) -> SupportPlan {
    let n = space.num_vars();
    let sizes: Vec<usize> = (0..n).map(|i| space.size(i)).collect();
    if full_plan_size(&sizes, space.degree()) <= budget as f64 {
        return SupportPlan::Full;
    }
    let all;
    let seeds = match seeds {
        Some(s) => s,
        None => {
            all = subsets(n, seed_size);
            &all
        }
    };
    let mut extra = Vec::new();
    for s in seeds {
        for j in (0..n).filter(|j| !s.contains(j)) {
            let mut t = s.clone();
            t.push(j);
            t.sort_unstable();
            extra.push(t);
        }
    }
    SupportPlan::Closure(extra)
}

/// The pair juntas of the EMV objective with weight `2/n²` each.
pub fn emv_objective_juntas(inst: &EmvInstance) -> Vec<(Junta, f64)> {
    let n = inst.n();
    let w = 2.0 / (n * n) as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = inst.d(i, j);
            out.push((
                Junta::new(vec![i, j], move |p| {
                    let r = d - crate::instance::dist(p[0], p[1]);
                    r * r
                }),
                w,
            ));
        }
    }
    out
}

/// `E_i ‖x_i‖² ≤ 6·mean_sq·(1 + slack)`.
pub fn ball_constraint(inst: &EmvInstance) -> PeConstraint {
    let n = inst.n();
    PeConstraint {
        terms: (0..n)
            .map(|i| (Junta::new(vec![i], |p| p[0].iter().map(|c| c * c).sum()), 1.0 / n as f64))
            .collect(),
        relation: Relation::Le,
        rhs: BALL_CONSTANT * inst.mean_sq() * (1.0 + BALL_SLACK),
        name: "ball".into(),
    }
}

/// Builds the anchored relaxation with `x_anchor = 0` and the ball
/// constraint.
pub fn emv_relaxation(
    inst: &EmvInstance,
    anchor: usize,
    params: &EmvParams,
    grid: &Grid,
    seeds: Option<&[Vec<usize>]>,
) -> Result<SaRelaxation> {
    if anchor >= inst.n() {
        return Err(Error::InvalidParameter(format!("anchor {anchor} out of range")));
    }
    let k = inst.k();
    let space = VariableSpace::uniform(inst.n(), Alphabet::from_grid(grid, k), params.degree);
    let fixing = Fixing {
        var: anchor,
        point: vec![0.0; k],
    };
    let pinned = space.restrict(anchor, space.alphabet(anchor).position(&fixing.point).ok_or(Error::FixingNotOnGrid(anchor))?);
    let plan = choose_plan(&pinned, params.seed.size(), seeds, params.support_budget);
    build_sa_relaxation(&space, &emv_objective_juntas(inst), &[ball_constraint(inst)], &[fixing], &plan)
}

/// Optimum of the anchored relaxation: a lower bound on the discrete
/// optimum among grid embeddings with `x_anchor = 0` inside the ball.
pub fn lp_lower_bound(inst: &EmvInstance, anchor: usize, params: &EmvParams) -> Result<f64> {
    params.validate()?;
    let grid = emv_grid(inst, params)?;
    let relax = emv_relaxation(inst, anchor, params, &grid, None)?;
    let sol = solve(&relax.lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Solves the anchored relaxation and decodes it.
pub fn solve_anchor(inst: &EmvInstance, anchor: usize, params: &EmvParams, grid: &Grid, seeds: Option<&[Vec<usize>]>) -> Result<Option<(f64, PseudoDistribution)>> {
    let relax = emv_relaxation(inst, anchor, params, grid, seeds)?;
    let sol = solve(&relax.lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some((sol.objective, relax.layout.decode(&sol)?))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Anchor indices for the configured policy; sampling uses RNG stream 0.
pub fn pick_anchors(n: usize, anchors: &Anchors, rng_seed: u64) -> Result<Vec<usize>> {
    match anchors {
        Anchors::All => Ok((0..n).collect()),
        Anchors::Sample(c) => Ok(sample_distinct(n, (*c).max(1), &mut task_rng(rng_seed, 0))),
        Anchors::Fixed(list) => {
            if let Some(&a) = list.iter().find(|&&a| a >= n) {
                return Err(Error::InvalidParameter(format!("anchor {a} out of range")));
            }
            Ok(list.clone())
        }
    }
}

fn run_anchor(inst: &EmvInstance, params: &EmvParams, grid: &Grid, anchor: usize, stream: u64) -> Result<AnchorRun> {
    let mut rng = task_rng(params.rng_seed, stream);
    let importance = inst.row_mean_sq();
    let weights = PotentialWeights::new(inst.mean_sq(), grid.len().pow(inst.k() as u32));
    let pre_seeds = if params.seed.needs_mu() {
        None
    } else {
        Some(select_seed(&params.seed, &importance, None, weights, &mut rng)?)
    };
    let Some((lp_value, mu)) = solve_anchor(inst, anchor, params, grid, pre_seeds.as_deref())? else {
        return Ok(AnchorRun {
            anchor,
            lp_value: None,
            reports: Vec::new(),
            best: None,
        });
    };
    let seeds = match pre_seeds {
        Some(s) => s,
        None => select_seed(&params.seed, &importance, Some(&mu), weights, &mut rng)?,
    };
    let eval = |pts: &[Vec<f64>]| emv_objective(inst, pts).unwrap_or(f64::INFINITY);
    let mut reports = Vec::new();
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    for seed in &seeds {
        let (points, mut report) = condition_and_round(&mu, seed, eval, params.repeats, &mut rng)?;
        report.anchor = Some(anchor);
        report.lp_value = lp_value;
        report.rng_seed = params.rng_seed;
        report.rng_stream = stream;
        if best.as_ref().is_none_or(|b| report.objective < b.1) {
            best = Some((points, report.objective));
        }
        reports.push(report);
    }
    Ok(AnchorRun {
        anchor,
        lp_value: Some(lp_value),
        reports,
        best,
    })
}

/// Runs the pipeline and returns the best embedding over all anchors,
/// seed sets and repetitions (normalized scale).
pub fn solve_emv(inst: &EmvInstance, params: &EmvParams) -> Result<EmvResult> {
    params.validate()?;
    let grid = emv_grid(inst, params)?;
    let anchors = pick_anchors(inst.n(), &params.anchors, params.rng_seed)?;
    let runs: Vec<AnchorRun> = anchors
        .par_iter()
        .enumerate()
        .map(|(t, &a)| run_anchor(inst, params, &grid, a, 1 + t as u64))
        .collect::<Result<Vec<_>>>()?;
    let (points, run_idx) = runs
        .iter()
        .enumerate()
        .filter_map(|(t, r)| r.best.as_ref().map(|b| (b, t)))
        .fold(None::<(&(Vec<Vec<f64>>, f64), usize)>, |acc, (b, t)| match acc {
            Some((a, _)) if a.1 <= b.1 => acc,
            _ => Some((b, t)),
        })
        .map(|(b, t)| (b.0.clone(), t))
        .ok_or(Error::AllAnchorsInfeasible)?;
    let mut embedding = Embedding::new(inst, points)?;
    let run = &runs[run_idx];
    let best_report = run
        .reports
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("feasible run has reports");
    let lp_min = runs.iter().filter_map(|r| r.lp_value).fold(f64::INFINITY, f64::min);
    let prov = &mut embedding.provenance;
    prov.insert("algorithm".into(), json!("emv"));
    prov.insert("anchor".into(), json!(run.anchor));
    prov.insert("seed".into(), json!(best_report.seed));
    prov.insert("repetition".into(), json!(best_report.repetition));
    prov.insert("rng_seed".into(), json!(params.rng_seed));
    prov.insert("rng_stream".into(), json!(best_report.rng_stream));
    prov.insert("lp_value".into(), json!(lp_min));
    prov.insert("grid_size".into(), json!(grid.len()));
    prov.insert("params".into(), serde_json::to_value(params)?);
    Ok(EmvResult { embedding, runs, grid })
}
