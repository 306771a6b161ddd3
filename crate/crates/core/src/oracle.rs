//! Ground-truth solvers at desk scale: exhaustive discrete search with
//! branch-and-bound, a continuous coordinate-descent baseline, and the
//! rank-one enumerations.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::instance::{dist, emv_objective, EmvInstance, Embedding, LraInstance, RankOne, WeightedEmvInstance};

/// Default cap on the number of enumerated assignments.
pub const MAX_STATES: f64 = 1e7;

/// All points of `Σ^k`, first coordinate most significant.
pub fn grid_points(grid: &Grid, k: usize) -> Vec<Vec<f64>> {
    let vals = grid.values();
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn check_states(q: usize, n: usize, max_states: f64) -> Result<()> {
    let states = (q as f64).powi(n as i32);
    if states > max_states {
        return Err(Error::TooLarge(format!("{q}^{n} assignments exceed the cap {max_states:e}")));
    }
    Ok(())
}

/// Exhaustive minimization of `Σ_{i<j} pair_cost(i, j, a_i, a_j)` over
/// assignments of `n` variables to `q` symbols. Workers split on the first
/// variable; each runs a depth-first search pruned by its own incumbent, so
/// the result does not depend on scheduling. Ties go to the
/// lexicographically first assignment.
fn branch_and_bound<F>(n: usize, q: usize, pair_cost: F) -> (Vec<usize>, f64)
where
    F: Fn(usize, usize, usize, usize) -> f64 + Sync,
{
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let results: Vec<(Vec<usize>, f64)> = (0..q)
        .into_par_iter()
        .map(|first| {
            let mut assign = vec![0usize; n];
            assign[0] = first;
            let mut best = (assign.clone(), f64::INFINITY);
            dfs(1, 0.0, &mut assign, q, &pair_cost, &mut best);
            best
        })
        .collect();
    results
        .into_iter()
        .fold((Vec::new(), f64::INFINITY), |acc, r| if r.1 < acc.1 { r } else { acc })
}

fn dfs<F>(depth: usize, partial: f64, assign: &mut Vec<usize>, q: usize, cost: &F, best: &mut (Vec<usize>, f64))
where
    F: Fn(usize, usize, usize, usize) -> f64,
{
    let n = assign.len();
    if depth == n {
        if partial < best.1 {
            *best = (assign.clone(), partial);
        }
        return;
    }
    for s in 0..q {
        assign[depth] = s;
        let mut add = 0.0;
        for i in 0..depth {
            add += cost(i, depth, assign[i], s);
        }
        let next = partial + add;
        // costs are nonnegative, so a partial sum at the incumbent cannot win
        if next < best.1 {
            dfs(depth + 1, next, assign, q, cost, best);
        }
    }
}

/// Exact minimizer of the EMV objective over `(Σ^k)^n`.
pub fn brute_force_emv(inst: &EmvInstance, grid: &Grid, max_states: f64) -> Result<(Embedding, f64)> {
    let (n, k) = (inst.n(), inst.k());
    let pts = grid_points(grid, k);
    check_states(pts.len(), n, max_states)?;
    let (assign, _) = branch_and_bound(n, pts.len(), |i, j, a, b| {
        let r = inst.d(i, j) - dist(&pts[a], &pts[b]);
        r * r
    });
    let points: Vec<Vec<f64>> = assign.iter().map(|&s| pts[s].clone()).collect();
    let emb = Embedding::new(inst, points)?;
    let opt = emb.objective;
    Ok((emb, opt))
}

/// Exact minimizer of the weighted objective over `(Σ^k)^n`.
pub fn brute_force_wemv(inst: &WeightedEmvInstance, grid: &Grid, max_states: f64) -> Result<(Embedding, f64)> {
    let base = inst.base();
    let (n, k) = (base.n(), base.k());
    let pts = grid_points(grid, k);
    check_states(pts.len(), n, max_states)?;
    let (assign, _) = branch_and_bound(n, pts.len(), |i, j, a, b| {
        let r = base.d(i, j) - dist(&pts[a], &pts[b]);
        inst.w(i, j) * r * r
    });
    let points: Vec<Vec<f64>> = assign.iter().map(|&s| pts[s].clone()).collect();
    let emb = Embedding::new_weighted(inst, points)?;
    let opt = emb.objective;
    Ok((emb, opt))
}

fn best_u_for_v(inst: &LraInstance, vals: &[f64], v: &[f64]) -> (Vec<f64>, f64) {
    let p = inst.p() as i32;
    let mut u = Vec::with_capacity(inst.n());
    let mut total = 0.0;
    for i in 0..inst.n() {
        let mut best = (0.0, f64::INFINITY);
        for &x in vals {
            let c: f64 = v.iter().enumerate().map(|(j, vj)| (inst.a(i, j) - x * vj).powi(p)).sum();
            if c < best.1 {
                best = (x, c);
            }
        }
        u.push(best.0);
        total += best.1;
    }
    (u, total)
}

fn enumerate_vectors(vals: &[f64], len: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let q = vals.len();
    let total = q.pow(len as u32);
    (0..total).map(move |mut idx| {
        let mut out = vec![0.0; len];
        for slot in out.iter_mut().rev() {
            *slot = vals[idx % q];
            idx /= q;
        }
        out
    })
}

/// Exact minimizer of `‖A − u vᵀ‖_p^p` over `u ∈ Σ^n, v ∈ Σ^m`. For fixed
/// `v` the rows decouple, so each `u_i` is chosen independently.
pub fn brute_force_lra(inst: &LraInstance, grid: &Grid, max_states: f64) -> Result<(RankOne, f64)> {
    let vals = grid.values();
    check_states(vals.len(), inst.m(), max_states / inst.n().max(1) as f64)?;
    let best = enumerate_vectors(vals, inst.m())
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|v| {
            let (u, c) = best_u_for_v(inst, vals, &v);
            (u, v, c)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None::<(Vec<f64>, Vec<f64>, f64)>, |acc, r| match acc {
            Some(a) if a.2 <= r.2 => Some(a),
            _ => Some(r),
        })
        .expect("nonempty grid");
    let r = RankOne::new(inst, best.0, best.1)?;
    let opt = r.objective;
    Ok((r, opt))
}

/// Minimum residual among grid factors with `Σ u_i^p = s_u` and
/// `Σ v_j^p = s_v` (within 1e-9). `None` when no assignment matches.
pub fn filtered_brute_force_lra(
    inst: &LraInstance,
    grid: &Grid,
    s_u: f64,
    s_v: f64,
    max_states: f64,
) -> Result<Option<(RankOne, f64)>> {
    let vals = grid.values();
    check_states(vals.len(), inst.n() + inst.m(), max_states)?;
    let p = inst.p() as i32;
    let norm = |x: &[f64]| x.iter().map(|t| t.powi(p)).sum::<f64>();
    let us: Vec<Vec<f64>> = enumerate_vectors(vals, inst.n())
        .filter(|u| (norm(u) - s_u).abs() <= 1e-9)
        .collect();
    let vs: Vec<Vec<f64>> = enumerate_vectors(vals, inst.m())
        .filter(|v| (norm(v) - s_v).abs() <= 1e-9)
        .collect();
    let mut best: Option<(usize, usize, f64)> = None;
    for (a, u) in us.iter().enumerate() {
        for (b, v) in vs.iter().enumerate() {
            let c = crate::instance::lra_objective(inst, u, v)?;
            if best.is_none_or(|(_, _, bc)| c < bc) {
                best = Some((a, b, c));
            }
        }
    }
    match best {
        None => Ok(None),
        Some((a, b, c)) => Ok(Some((RankOne::new(inst, us[a].clone(), vs[b].clone())?, c))),
    }
}

/// Classical MDS: top-`k` eigenvectors of the double-centred squared
/// distance matrix.
pub fn classical_mds(inst: &EmvInstance) -> Vec<Vec<f64>> {
    let (n, k) = (inst.n(), inst.k());
    let d2 = DMatrix::from_fn(n, n, |i, j| inst.d(i, j) * inst.d(i, j));
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let total = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + total));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    (0..n)
        .map(|i| {
            (0..k)
                .map(|c| {
                    order.get(c).map_or(0.0, |&e| {
                        let lambda = eig.eigenvalues[e].max(0.0);
                        eig.eigenvectors[(i, e)] * lambda.sqrt()
                    })
                })
                .collect()
        })
        .collect()
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Result of the continuous baseline, with the objective after each sweep
/// of the winning restart.
#[derive(Debug, Clone)]
pub struct LocalSearch {
    pub embedding: Embedding,
    pub sweep_objectives: Vec<f64>,
}

/// Multi-restart coordinate descent. Restart 0 starts from classical MDS,
/// the others from random points; each coordinate move is a golden-section
/// line search accepted only when it lowers the objective.
pub fn local_search_emv<R: Rng + ?Sized>(inst: &EmvInstance, restarts: usize, rng: &mut R) -> Result<LocalSearch> {
    let (n, k) = (inst.n(), inst.k());
    let spread = inst.mean_sq().sqrt().max(1e-12);
    let max_d = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| inst.d(i, j))
        .fold(0.0, f64::max);
    let mut best: Option<LocalSearch> = None;
    for r in 0..restarts.max(1) {
        let mut x: Vec<Vec<f64>> = if r == 0 {
            classical_mds(inst)
        } else {
            (0..n)
                .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0) * spread).collect())
                .collect()
        };
        let mut obj = emv_objective(inst, &x)?;
        let mut sweeps = vec![obj];
        for _ in 0..200 {
            let before = obj;
            for i in 0..n {
                for c in 0..k {
                    let local = |t: f64, x: &Vec<Vec<f64>>| -> f64 {
                        let mut xi = x[i].clone();
                        xi[c] = t;
                        (0..n)
                            .filter(|&j| j != i)
                            .map(|j| {
                                let e = inst.d(i, j) - dist(&xi, &x[j]);
                                e * e
                            })
                            .sum()
                    };
                    let lo = x.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min) - max_d;
                    let hi = x.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max) + max_d;
                    let cur = x[i][c];
                    let cur_val = local(cur, &x);
                    // a coarse scan picks the basin, golden section refines it
                    let steps = 40;
                    let h = (hi - lo) / steps as f64;
                    let start = (0..=steps)
                        .map(|s| lo + h * s as f64)
                        .min_by(|a, b| local(*a, &x).total_cmp(&local(*b, &x)))
                        .unwrap_or(cur);
                    let t = golden_section(|t| local(t, &x), start - h, start + h, 60);
                    let polished = golden_section(|t| local(t, &x), cur - h, cur + h, 60);
                    let cand = if local(t, &x) <= local(polished, &x) { t } else { polished };
                    if local(cand, &x) < cur_val {
                        x[i][c] = cand;
                    }
                }
            }
            obj = emv_objective(inst, &x)?;
            sweeps.push(obj);
            if before - obj <= 1e-13 * before.max(1e-300) {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| obj < b.embedding.objective) {
            best = Some(LocalSearch {
                embedding: Embedding::new(inst, x)?,
                sweep_objectives: sweeps,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_uniform_grid;
    use crate::instance::{gen_planted, gen_random_nonmetric, load_emv, load_lra};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_points() {
        let inst = load_emv(&[vec![0.0, 1.0], vec![1.0, 0.0]], 1).unwrap();
        let g = Grid::custom([0.0, 1.0]).unwrap();
        let (emb, opt) = brute_force_emv(&inst, &g, MAX_STATES).unwrap();
        assert_eq!(opt, 0.0);
        assert_eq!(emb.points, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn all_zero_instance() {
        let inst = load_emv(&vec![vec![0.0; 3]; 3], 1).unwrap();
        let g = build_uniform_grid(-1.0, 1.0, 1.0).unwrap();
        let (emb, opt) = brute_force_emv(&inst, &g, MAX_STATES).unwrap();
        assert_eq!(opt, 0.0);
        assert!(emb.points.iter().all(|p| p == &emb.points[0]));
    }

    #[test]
    fn too_large() {
        let inst = load_emv(&vec![vec![0.0; 10]; 10], 1).unwrap();
        let g = build_uniform_grid(-5.0, 5.0, 1.0).unwrap();
        assert!(matches!(brute_force_emv(&inst, &g, MAX_STATES), Err(Error::TooLarge(_))));
    }

    #[test]
    fn local_search_two_points_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = gen_random_nonmetric(2, 3.0, &mut rng).unwrap();
        let ls = local_search_emv(&inst, 2, &mut rng).unwrap();
        assert!(ls.embedding.objective < 1e-20);
        assert!(ls.sweep_objectives.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn local_search_planted() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in [1, 2] {
            let planted = gen_planted(6, k, 0.0, &mut rng).unwrap();
            let ls = local_search_emv(&planted.instance, 3, &mut rng).unwrap();
            assert!(ls.embedding.objective <= 1e-6 * planted.instance.mean_sq());
        }
    }

    #[test]
    fn lra_planted_zero() {
        let a: Vec<Vec<f64>> = [1.0, -1.0].iter().map(|u| [0.5, 1.0].iter().map(|v| u * v).collect()).collect();
        let inst = load_lra(&a, 2).unwrap();
        let g = Grid::custom([-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
        let (_, opt) = brute_force_lra(&inst, &g, MAX_STATES).unwrap();
        assert_eq!(opt, 0.0);
        let f = filtered_brute_force_lra(&inst, &g, 2.0, 1.25, MAX_STATES).unwrap().unwrap();
        assert_eq!(f.1, 0.0);
        assert!(filtered_brute_force_lra(&inst, &g, 0.3, 1.0, MAX_STATES).unwrap().is_none());
    }
}
