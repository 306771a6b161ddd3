//! Linear-program model, solver front end and a cutting-plane loop.
//!
//! Rows are stored sparse and sorted by variable index. Solving is delegated
//! to HiGHS; this module owns model validation, post-solve verification of
//! feasibility and the cut loop.

use std::fmt::Write as _;

use highs::{HighsModelStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility tolerance for rows and variable bounds.
pub const FEAS_TOL: f64 = 1e-9;
/// Optimality tolerance used when comparing objective values.
pub const OPT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: String,
}

impl Row {
    /// Builds a row, merging duplicate indices and dropping zeros.
    pub fn new(
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
        name: impl Into<String>,
    ) -> Row {
        let mut coeffs: Vec<(usize, f64)> = coeffs.into_iter().collect();
        coeffs.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (i, c) in coeffs {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        Row {
            coeffs: merged,
            relation,
            rhs,
            name: name.into(),
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, c)| c * x[i]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.relation {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - a).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Minimization LP over bounded variables (default bounds `[0, ∞)`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a nonnegative variable with the given cost; returns its index.
    pub fn add_var(&mut self, cost: f64) -> usize {
        self.add_bounded_var(cost, 0.0, f64::INFINITY)
    }

    pub fn add_bounded_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.objective.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    pub fn add_row(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`. Row violations are divided by
    /// the row's largest coefficient magnitude when that exceeds 1.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x) / r.coeffs.iter().map(|&(_, c)| c.abs()).fold(1.0, f64::max))
            .fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite objective coefficient".into()));
        }
        for (lo, hi) in &self.bounds {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidParameter("invalid variable bounds".into()));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidParameter(format!("row {}: non-finite rhs", row.name)));
            }
            for &(i, c) in &row.coeffs {
                if i >= n || !c.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "row {}: bad coefficient for variable {i}",
                        row.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Text dump, one row per line, for external verification.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vars {}", self.num_vars());
        let _ = write!(out, "min:");
        for (i, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {c:+e} x{i}");
            }
        }
        out.push('\n');
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if *lo != 0.0 || hi.is_finite() {
                let _ = writeln!(out, "bound x{i} {lo:e} {hi:e}");
            }
        }
        for row in &self.rows {
            let _ = write!(out, "{}:", row.name);
            for (i, c) in &row.coeffs {
                let _ = write!(out, " {c:+e} x{i}");
            }
            let _ = writeln!(out, " {} {:e}", row.relation.symbol(), row.rhs);
        }
        out
    }

    /// Dual program of an LP whose variables all have default bounds
    /// `[0, ∞)`: `max bᵀy` subject to `Aᵀy <= c`, with `y >= 0` on `>=`
    /// rows, `y <= 0` on `<=` rows and `y` free on equalities. Returned in
    /// minimization form (`min -bᵀy`).
    pub fn dual(&self) -> Result<LinearProgram> {
        if self.bounds.iter().any(|&(lo, hi)| lo != 0.0 || hi.is_finite()) {
            return Err(Error::InvalidParameter(
                "dual() requires default variable bounds".into(),
            ));
        }
        let mut dual = LinearProgram::new();
        for row in &self.rows {
            let (lo, hi) = match row.relation {
                Relation::Ge => (0.0, f64::INFINITY),
                Relation::Le => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (f64::NEG_INFINITY, f64::INFINITY),
            };
            dual.add_bounded_var(-row.rhs, lo, hi);
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vars()];
        for (r, row) in self.rows.iter().enumerate() {
            for &(i, c) in &row.coeffs {
                cols[i].push((r, c));
            }
        }
        for (i, col) in cols.into_iter().enumerate() {
            dual.add_row(Row::new(col, Relation::Le, self.objective[i], format!("col{i}")));
        }
        Ok(dual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
}

impl LpSolution {
    fn non_optimal(status: LpStatus) -> Self {
        LpSolution {
            status,
            values: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            max_violation: f64::INFINITY,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Programs with at least this many variables go to the interior point
/// method (with crossover) first; smaller ones use dual simplex directly.
pub const IPM_MIN_VARS: usize = 4000;

/// Solves `lp` with HiGHS (single-threaded, fixed seed). Infeasible and
/// unbounded programs are reported through [`LpStatus`]; solver breakdowns
/// and optima failing the feasibility tolerance surface as
/// [`Error::NumericalFailure`].
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    if lp.objective.len() >= IPM_MIN_VARS {
        // anything but a verified optimum or an infeasibility certificate
        // is retried with simplex
        if let Ok(Some(sol)) = solve_once(lp, true, "ipm") {
            if sol.status != LpStatus::Unbounded {
                return Ok(sol);
            }
        }
    }
    match solve_once(lp, true, "simplex") {
        Ok(Some(sol)) => Ok(sol),
        // presolve cannot always tell infeasible from unbounded, and on
        // nearly infeasible programs it can break down outright
        _ => solve_once(lp, false, "simplex")?.ok_or_else(|| Error::NumericalFailure("unbounded or infeasible".into())),
    }
}

fn solve_once(lp: &LinearProgram, presolve: bool, solver: &str) -> Result<Option<LpSolution>> {
    let mut problem = RowProblem::default();
    let cols: Vec<_> = lp
        .objective
        .iter()
        .zip(&lp.bounds)
        .map(|(&c, &(lo, hi))| problem.add_column(c, lo..=hi))
        .collect();
    for row in &lp.rows {
        let coeffs: Vec<_> = row.coeffs.iter().map(|&(i, c)| (cols[i], c)).collect();
        match row.relation {
            Relation::Le => problem.add_row(..=row.rhs, &coeffs),
            Relation::Eq => problem.add_row(row.rhs..=row.rhs, &coeffs),
            Relation::Ge => problem.add_row(row.rhs.., &coeffs),
        }
    }
    let mut model = problem.optimise(Sense::Minimise);
    model.make_quiet();
    model.set_option("threads", 1);
    model.set_option("random_seed", 0);
    model.set_option("solver", solver);
    model.set_option("presolve", if presolve { "on" } else { "off" });
    model.set_option("primal_feasibility_tolerance", FEAS_TOL / 10.0);
    model.set_option("dual_feasibility_tolerance", FEAS_TOL / 10.0);
    let solved = model
        .try_solve()
        .map_err(|e| Error::NumericalFailure(format!("solver error {e:?}")))?;
    match solved.status() {
        HighsModelStatus::Optimal => {}
        HighsModelStatus::Infeasible => return Ok(Some(LpSolution::non_optimal(LpStatus::Infeasible))),
        HighsModelStatus::Unbounded => return Ok(Some(LpSolution::non_optimal(LpStatus::Unbounded))),
        HighsModelStatus::UnboundedOrInfeasible => return Ok(None),
        other => return Err(Error::NumericalFailure(format!("solver stopped with status {other:?}"))),
    }
    let values = solved.get_solution().columns().to_vec();
    let max_violation = lp.max_violation(&values);
    if max_violation > FEAS_TOL {
        return Err(Error::NumericalFailure(format!(
            "optimum violates constraints by {max_violation:e}"
        )));
    }
    Ok(Some(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&values),
        values,
        max_violation,
    }))
}

/// Result of a cutting-plane loop.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSolution {
    pub solution: LpSolution,
    pub cuts_added: usize,
    /// True when the oracle still separated after the last allowed round.
    pub limit_reached: bool,
    /// True when re-solving after a cut broke down numerically; the
    /// solution is then the last one obtained and that cut is dropped.
    pub solver_breakdown: bool,
    /// The program including every accepted cut.
    pub program: LinearProgram,
}

/// Repeatedly solves, asks `cut_oracle` for a violated valid inequality and
/// adds it, for at most `max_rounds` cuts. Never fails on the round limit.
pub fn run_cut_loop<F>(lp: &LinearProgram, mut cut_oracle: F, max_rounds: usize) -> Result<CutSolution>
where
    F: FnMut(&LpSolution) -> Option<Row>,
{
    let mut program = lp.clone();
    let mut cuts_added = 0;
    let mut solution = solve(&program)?;
    loop {
        if !solution.is_optimal() {
            return Ok(CutSolution {
                solution,
                cuts_added,
                limit_reached: false,
                solver_breakdown: false,
                program,
            });
        }
        match cut_oracle(&solution) {
            None => {
                return Ok(CutSolution {
                    solution,
                    cuts_added,
                    limit_reached: false,
                    solver_breakdown: false,
                    program,
                })
            }
            Some(_) if cuts_added >= max_rounds => {
                return Ok(CutSolution {
                    solution,
                    cuts_added,
                    limit_reached: true,
                    solver_breakdown: false,
                    program,
                })
            }
            Some(row) => {
                let mut next = program.clone();
                next.add_row(row);
                match solve(&next) {
                    Ok(s) => {
                        program = next;
                        solution = s;
                        cuts_added += 1;
                    }
                    Err(Error::NumericalFailure(_)) => {
                        return Ok(CutSolution {
                            solution,
                            cuts_added,
                            limit_reached: false,
                            solver_breakdown: true,
                            program,
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
}

/// Cutting-plane solve that fails with [`Error::CutLimitReached`] if the
/// oracle is still separating after `max_rounds` cuts.
pub fn solve_with_cuts<F>(lp: &LinearProgram, cut_oracle: F, max_rounds: usize) -> Result<CutSolution>
where
    F: FnMut(&LpSolution) -> Option<Row>,
{
    let out = run_cut_loop(lp, cut_oracle, max_rounds)?;
    if out.limit_reached {
        return Err(Error::CutLimitReached(max_rounds));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0);
        lp.add_row(Row::new([(x, 1.0)], Relation::Ge, 3.0, "lb"));
        let sol = solve(&lp).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.values[0] - 3.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_pair() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0);
        lp.add_row(Row::new([(x, 1.0)], Relation::Le, 1.0, "a"));
        lp.add_row(Row::new([(x, 1.0)], Relation::Ge, 2.0, "b"));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction() {
        let mut lp = LinearProgram::new();
        lp.add_var(-1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn row_merges_duplicates() {
        let r = Row::new([(3, 1.0), (1, 2.0), (3, -1.0), (0, 4.0)], Relation::Eq, 0.0, "r");
        assert_eq!(r.coeffs, vec![(0, 4.0), (1, 2.0)]);
    }

    #[test]
    fn rejects_non_finite() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(f64::NAN);
        lp.add_row(Row::new([(x, 1.0)], Relation::Le, 1.0, "a"));
        assert!(solve(&lp).is_err());
    }

    #[test]
    fn cut_loop_without_cuts_matches_solve() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0);
        lp.add_row(Row::new([(x, 1.0)], Relation::Le, 2.0, "ub"));
        let plain = solve(&lp).unwrap();
        let cut = solve_with_cuts(&lp, |_| None, 5).unwrap();
        assert_eq!(cut.solution, plain);
        assert_eq!(cut.cuts_added, 0);
    }

    #[test]
    fn scripted_cut() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0);
        lp.add_row(Row::new([(x, 1.0)], Relation::Le, 2.0, "ub"));
        let mut issued = false;
        let out = solve_with_cuts(
            &lp,
            |_| {
                if issued {
                    None
                } else {
                    issued = true;
                    Some(Row::new([(x, 1.0)], Relation::Le, 1.0, "cut"))
                }
            },
            3,
        )
        .unwrap();
        assert!((out.solution.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(out.cuts_added, 1);
    }

    #[test]
    fn cut_limit() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0);
        lp.add_row(Row::new([(x, 1.0)], Relation::Le, 2.0, "ub"));
        let mut bound = 2.0;
        let err = solve_with_cuts(
            &lp,
            |_| {
                bound *= 0.5;
                Some(Row::new([(x, 1.0)], Relation::Le, bound, "cut"))
            },
            4,
        )
        .unwrap_err();
        assert_eq!(err, Error::CutLimitReached(4));
    }

    #[test]
    fn dump_lists_rows() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0);
        let y = lp.add_var(0.0);
        lp.add_row(Row::new([(x, 1.0), (y, -2.0)], Relation::Le, 4.0, "r0"));
        let text = lp.dump();
        assert!(text.lines().any(|l| l.starts_with("r0:") && l.contains("<=")));
    }
}
