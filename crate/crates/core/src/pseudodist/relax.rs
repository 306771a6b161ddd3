//! Sherali-Adams LP relaxation over a [`VariableSpace`].

use std::collections::{BTreeMap, BTreeSet};

use super::{Junta, PseudoDistribution, Table, VariableSpace, CONSISTENCY_TOL};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpSolution, Relation, Row};

/// Which supports get a table (and LP variables).
#[derive(Debug, Clone, PartialEq)]
pub enum SupportPlan {
    /// Every support of size at most the degree.
    Full,
    /// All singletons and pairs, the listed supports, and their subsets.
    Closure(Vec<Vec<usize>>),
}

/// A linear constraint on pseudo-expectations:
/// `Σ coef · pE[junta]  (relation)  rhs`.
#[derive(Debug, Clone)]
pub struct PeConstraint {
    pub terms: Vec<(Junta, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: String,
}

/// Pins variable `var` to `point`, which must belong to its alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixing {
    pub var: usize,
    pub point: Vec<f64>,
}

/// Offsets of each stored table inside the LP variable vector.
#[derive(Debug, Clone)]
pub struct Layout {
    space: VariableSpace,
    blocks: BTreeMap<Vec<usize>, (usize, Vec<usize>)>,
    num_vars: usize,
}

impl Layout {
    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn supports(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.blocks.keys()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Coefficients of `pE[f]` as a linear form in the LP variables. A
    /// constant junta is expressed through the table of variable 0, whose
    /// entries sum to one.
    pub fn linear_form(&self, f: &Junta) -> Result<Vec<(usize, f64)>> {
        let support: Vec<usize> = if f.support().is_empty() {
            vec![0]
        } else {
            f.support().to_vec()
        };
        let (offset, radices) = self
            .blocks
            .get(&support)
            .ok_or_else(|| Error::MissingTable(support.clone()))?;
        let values = if f.support().is_empty() {
            let c = f.eval(&[]);
            vec![c; radices[0]]
        } else {
            f.tabulate(&self.space, radices)
        };
        Ok(values
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .map(|(e, v)| (offset + e, v))
            .collect())
    }

    /// Index of the LP variable holding `μ_T(digits)`.
    pub fn var_of(&self, support: &[usize], digits: &[usize]) -> Option<usize> {
        let (offset, radices) = self.blocks.get(support)?;
        Some(offset + digits.iter().zip(radices).fold(0, |acc, (&d, &r)| acc * r + d))
    }

    /// Reads the tables out of an LP solution, clamping round-off negatives
    /// and renormalizing.
    pub fn decode(&self, solution: &LpSolution) -> Result<PseudoDistribution> {
        if !solution.is_optimal() {
            return Err(Error::Infeasible);
        }
        let tables: Vec<Table> = self
            .blocks
            .iter()
            .map(|(support, (offset, radices))| {
                let size: usize = radices.iter().product();
                let mut t = Table::new(
                    support.clone(),
                    radices.clone(),
                    solution.values[*offset..offset + size].to_vec(),
                );
                t.normalize();
                t
            })
            .collect();
        let mu = PseudoDistribution {
            space: self.space.clone(),
            tables: tables.into_iter().map(|t| (t.support.clone(), t)).collect(),
            conditioned_on: Vec::new(),
        };
        let gap = mu.consistency_gap();
        if gap > CONSISTENCY_TOL {
            return Err(Error::NumericalFailure(format!(
                "decoded tables disagree by {gap:e}"
            )));
        }
        Ok(mu)
    }
}

/// An LP together with the layout needed to decode it.
#[derive(Debug, Clone)]
pub struct SaRelaxation {
    pub lp: LinearProgram,
    pub layout: Layout,
}

/// All sorted subsets of `0..n` of size `1..=degree`.
pub(crate) fn all_supports(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(0, n, degree, &mut cur, &mut out);
    out
}

/// Closes `supports` (plus all singletons) under taking nonempty subsets.
pub(crate) fn downward_closure(n: usize, supports: impl IntoIterator<Item = Vec<usize>>) -> BTreeSet<Vec<usize>> {
    let mut closed: BTreeSet<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut stack: Vec<Vec<usize>> = supports.into_iter().filter(|s| !s.is_empty()).collect();
    while let Some(s) = stack.pop() {
        if !closed.insert(s.clone()) || s.len() == 1 {
            continue;
        }
        for d in 0..s.len() {
            let mut sub = s.clone();
            sub.remove(d);
            if !closed.contains(&sub) {
                stack.push(sub);
            }
        }
    }
    closed
}

/// Builds the Sherali-Adams LP minimizing `Σ weight · pE[junta]` subject to
/// local consistency, the extra pseudo-expectation constraints and the
/// fixings.
pub fn build_sa_relaxation(
    space: &VariableSpace,
    objective: &[(Junta, f64)],
    constraints: &[PeConstraint],
    fixings: &[Fixing],
    plan: &SupportPlan,
) -> Result<SaRelaxation> {
    let n = space.num_vars();
    let degree = space.degree();
    let mut space = space.clone();
    for fx in fixings {
        let s = space
            .alphabet(fx.var)
            .position(&fx.point)
            .ok_or(Error::FixingNotOnGrid(fx.var))?;
        space = space.restrict(fx.var, s);
    }

    let mut wanted: Vec<Vec<usize>> = match plan {
        SupportPlan::Full => all_supports(n, degree),
        SupportPlan::Closure(extra) => {
            let mut w = extra.clone();
            if degree >= 2 {
                w.extend(all_supports(n, 2).into_iter().filter(|s| s.len() == 2));
            }
            w
        }
    };
    let junta_supports = objective
        .iter()
        .map(|(f, _)| f)
        .chain(constraints.iter().flat_map(|c| c.terms.iter().map(|(f, _)| f)))
        .map(|f| f.support().to_vec());
    wanted.extend(junta_supports);
    for s in &wanted {
        if s.len() > degree {
            return Err(Error::DegreeExceeded {
                size: s.len(),
                degree,
            });
        }
        if let Some(&v) = s.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidParameter(format!("support variable {v} out of range")));
        }
    }
    let supports = downward_closure(n, wanted);

    let mut blocks = BTreeMap::new();
    let mut num_vars = 0;
    for s in supports {
        let radices = space.radices(&s);
        let size: usize = radices.iter().product();
        blocks.insert(s, (num_vars, radices));
        num_vars += size;
    }
    let layout = Layout {
        space,
        blocks,
        num_vars,
    };

    let mut lp = LinearProgram::new();
    for _ in 0..num_vars {
        lp.add_var(0.0);
    }
    for (f, w) in objective {
        for (v, c) in layout.linear_form(f)? {
            let cur = lp.objective()[v];
            lp.set_cost(v, cur + w * c);
        }
    }
    for i in 0..n {
        let (offset, radices) = &layout.blocks[&vec![i]];
        lp.add_row(Row::new(
            (0..radices[0]).map(|e| (offset + e, 1.0)),
            Relation::Eq,
            1.0,
            format!("norm[{i}]"),
        ));
    }
    for (support, (offset, radices)) in &layout.blocks {
        if support.len() < 2 {
            continue;
        }
        // consistency with each immediate subset, dropping one coordinate
        for d in 0..support.len() {
            let mut sub = support.clone();
            sub.remove(d);
            let (sub_offset, sub_radices) = &layout.blocks[&sub];
            let sub_size: usize = sub_radices.iter().product();
            let mut rows: Vec<Vec<(usize, f64)>> = (0..sub_size).map(|e| vec![(sub_offset + e, -1.0)]).collect();
            let size: usize = radices.iter().product();
            let mut digits = vec![0; support.len()];
            for e in 0..size {
                let mut idx = e;
                for p in (0..radices.len()).rev() {
                    digits[p] = idx % radices[p];
                    idx /= radices[p];
                }
                let j = digits
                    .iter()
                    .zip(radices)
                    .enumerate()
                    .filter(|&(p, _)| p != d)
                    .fold(0, |acc, (_, (&dg, &r))| acc * r + dg);
                rows[j].push((offset + e, 1.0));
            }
            for (j, coeffs) in rows.into_iter().enumerate() {
                lp.add_row(Row::new(coeffs, Relation::Eq, 0.0, format!("cons{support:?}-{}[{j}]", support[d])));
            }
        }
    }
    for c in constraints {
        let mut coeffs = Vec::new();
        for (f, w) in &c.terms {
            coeffs.extend(layout.linear_form(f)?.into_iter().map(|(v, x)| (v, w * x)));
        }
        lp.add_row(Row::new(coeffs, c.relation, c.rhs, c.name.clone()));
    }
    Ok(SaRelaxation { lp, layout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve;
    use crate::pseudodist::{pe, Alphabet};

    fn binary(n: usize, degree: usize) -> VariableSpace {
        VariableSpace::uniform(n, Alphabet::new(1, &[vec![0.0], vec![1.0]]), degree)
    }

    #[test]
    fn empty_objective_is_feasible() {
        let relax = build_sa_relaxation(&binary(2, 2), &[], &[], &[], &SupportPlan::Full).unwrap();
        let sol = solve(&relax.lp).unwrap();
        assert!(sol.is_optimal());
        let mu = relax.layout.decode(&sol).unwrap();
        assert!(mu.consistency_gap() < 1e-9);
        assert!((mu.table(&[0, 1]).unwrap().total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixing_pins_marginal() {
        let fx = Fixing {
            var: 1,
            point: vec![1.0],
        };
        let relax = build_sa_relaxation(&binary(2, 2), &[], &[], &[fx], &SupportPlan::Full).unwrap();
        let mu = relax.layout.decode(&solve(&relax.lp).unwrap()).unwrap();
        assert_eq!(mu.marginal(1), &[1.0]);
        assert_eq!(mu.space().point(1, 0), &[1.0]);
        let bad = Fixing {
            var: 0,
            point: vec![0.5],
        };
        assert!(matches!(
            build_sa_relaxation(&binary(2, 2), &[], &[], &[bad], &SupportPlan::Full),
            Err(Error::FixingNotOnGrid(0))
        ));
    }

    #[test]
    fn degree_exceeded() {
        let f = Junta::new(vec![0, 1, 2], |_| 0.0);
        assert!(matches!(
            build_sa_relaxation(&binary(3, 2), &[(f, 1.0)], &[], &[], &SupportPlan::Full),
            Err(Error::DegreeExceeded { size: 3, degree: 2 })
        ));
    }

    #[test]
    fn product_objective_minimum_zero() {
        let f = Junta::new(vec![0, 1], |p| p[0][0] * p[1][0]);
        let relax = build_sa_relaxation(&binary(3, 3), &[(f.clone(), 1.0)], &[], &[], &SupportPlan::Full).unwrap();
        let sol = solve(&relax.lp).unwrap();
        assert!(sol.objective.abs() < 1e-9);
        let mu = relax.layout.decode(&sol).unwrap();
        assert!(pe(&mu, &f).unwrap().abs() < 1e-9);
    }

    #[test]
    fn constraint_forces_correlation() {
        // pE[x0] = pE[x1] = 1/2 and pE[x0 x1] minimized: the minimum is 0
        let x0 = Junta::new(vec![0], |p| p[0][0]);
        let x1 = Junta::new(vec![1], |p| p[0][0]);
        let cons = vec![
            PeConstraint {
                terms: vec![(x0, 1.0)],
                relation: Relation::Eq,
                rhs: 0.5,
                name: "m0".into(),
            },
            PeConstraint {
                terms: vec![(x1, 1.0)],
                relation: Relation::Eq,
                rhs: 0.5,
                name: "m1".into(),
            },
        ];
        let f = Junta::new(vec![0, 1], |p| p[0][0] * p[1][0]);
        let relax = build_sa_relaxation(&binary(2, 2), &[(f, -1.0)], &cons, &[], &SupportPlan::Full).unwrap();
        let sol = solve(&relax.lp).unwrap();
        assert!((sol.objective + 0.5).abs() < 1e-9);
    }

    #[test]
    fn closure_plan_stores_pairs_and_subsets() {
        let relax = build_sa_relaxation(
            &binary(4, 3),
            &[],
            &[],
            &[],
            &SupportPlan::Closure(vec![vec![0, 2, 3]]),
        )
        .unwrap();
        let supports: Vec<_> = relax.layout.supports().cloned().collect();
        assert!(supports.contains(&vec![0, 2, 3]));
        assert!(supports.contains(&vec![1, 3]));
        assert!(!supports.contains(&vec![0, 1, 2]));
        assert_eq!(supports.len(), 4 + 6 + 1);
    }

    #[test]
    fn constant_junta_form() {
        let relax = build_sa_relaxation(&binary(2, 2), &[], &[], &[], &SupportPlan::Full).unwrap();
        let form = relax.layout.linear_form(&Junta::constant(2.0)).unwrap();
        assert_eq!(form.len(), 2);
        assert!(form.iter().all(|&(_, c)| c == 2.0));
    }
}
