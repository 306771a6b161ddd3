//! Problem instances, objective evaluation and synthetic generators.
//!
//! All pair averages use the ordered-pair convention: `E_{i,j}` runs over
//! all `n²` ordered pairs, diagonal included (where `d_ii = 0`).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Free-form provenance record attached to solver outputs.
pub type Provenance = BTreeMap<String, serde_json::Value>;

/// Tolerance used when checking that weight rows are regular.
pub const REGULARITY_TOL: f64 = 1e-9;

/// A normalized k-EMV instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmvInstance {
    n: usize,
    k: usize,
    d: Vec<f64>,
    mean_sq: f64,
    delta: f64,
    scale: f64,
}

fn check_square(matrix: &[Vec<f64>]) -> Result<usize> {
    let n = matrix.len();
    for row in matrix {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
    }
    Ok(n)
}

fn check_symmetric_zero_diag(matrix: &[Vec<f64>]) -> Result<usize> {
    let n = check_square(matrix)?;
    for i in 0..n {
        for j in 0..n {
            if !matrix[i][j].is_finite() {
                return Err(Error::NonFinite { i, j });
            }
        }
    }
    for i in 0..n {
        if matrix[i][i] != 0.0 {
            return Err(Error::NonzeroDiagonal {
                i,
                value: matrix[i][i],
            });
        }
        for j in (i + 1)..n {
            let (a, b) = (matrix[i][j], matrix[j][i]);
            if a != b {
                return Err(Error::AsymmetricInput { i, j, a, b });
            }
        }
    }
    Ok(n)
}

/// Validates and normalizes a dissimilarity matrix so that the smallest
/// nonzero entry becomes 1.
pub fn load_emv(matrix: &[Vec<f64>], k: usize) -> Result<EmvInstance> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let n = check_symmetric_zero_diag(matrix)?;
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeEntry { i, j, value: v });
            }
        }
    }
    let mut min_nz = f64::INFINITY;
    let mut max_nz: f64 = 0.0;
    for row in matrix {
        for &v in row {
            if v > 0.0 {
                min_nz = min_nz.min(v);
                max_nz = max_nz.max(v);
            }
        }
    }
    let (scale, delta) = if max_nz > 0.0 {
        (1.0 / min_nz, max_nz / min_nz)
    } else {
        (1.0, 1.0)
    };
    let d: Vec<f64> = matrix
        .iter()
        .flat_map(|row| row.iter().map(move |&v| v * scale))
        .collect();
    let mean_sq = if n == 0 {
        0.0
    } else {
        d.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64
    };
    Ok(EmvInstance {
        n,
        k,
        d,
        mean_sq,
        delta,
        scale,
    })
}

impl EmvInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Normalized dissimilarity.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// `E_{i,j} d_ij²` over ordered pairs.
    pub fn mean_sq(&self) -> f64 {
        self.mean_sq
    }

    /// Aspect ratio; 1 for an all-zero instance.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Multiplier that was applied to the raw input.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Dissimilarity on the scale of the raw input.
    pub fn original_d(&self, i: usize, j: usize) -> f64 {
        self.d(i, j) / self.scale
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.d(i, j)).collect())
            .collect()
    }

    /// `E_j d_ij²` for every `i`; used for importance-weighted seed sampling.
    pub fn row_mean_sq(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.d(i, j).powi(2)).sum::<f64>() / self.n as f64)
            .collect()
    }

    /// Maps points of a normalized embedding back to the input scale.
    pub fn denormalize(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|p| p.iter().map(|v| v / self.scale).collect())
            .collect()
    }

    /// Objective of a raw-scale embedding against the raw-scale dissimilarities.
    pub fn original_objective(&self, points: &[Vec<f64>]) -> Result<f64> {
        check_points(points, self.n, self.k)?;
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let r = self.original_d(i, j) - dist(&points[i], &points[j]);
                total += r * r;
            }
        }
        Ok(total / (self.n * self.n).max(1) as f64)
    }
}

/// Euclidean distance between two points.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_points(points: &[Vec<f64>], n: usize, k: usize) -> Result<()> {
    if points.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: points.len(),
        });
    }
    for p in points {
        if p.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: p.len(),
            });
        }
    }
    Ok(())
}

/// `E_{i,j} (d_ij - ‖x_i - x_j‖)²` over all ordered pairs.
pub fn emv_objective(inst: &EmvInstance, points: &[Vec<f64>]) -> Result<f64> {
    check_points(points, inst.n, inst.k)?;
    let n = inst.n;
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = inst.d(i, j) - dist(&points[i], &points[j]);
            total += 2.0 * r * r;
        }
    }
    Ok(total / (n * n) as f64)
}

/// A k-EMV instance with a symmetric, regular weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEmvInstance {
    base: EmvInstance,
    w: Vec<f64>,
    delta_reg: f64,
    weighted_mean_sq: f64,
}

/// Validates weights (symmetric, in `[0, 1]`, zero diagonal, rows summing
/// to a common `δ·n`) and builds a weighted instance.
pub fn load_wemv(d: &[Vec<f64>], w: &[Vec<f64>], k: usize) -> Result<WeightedEmvInstance> {
    let base = load_emv(d, k)?;
    let n = check_symmetric_zero_diag(w)?;
    if n != base.n {
        return Err(Error::DimensionMismatch {
            expected: base.n,
            got: n,
        });
    }
    for (i, row) in w.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::WeightOutOfRange { i, j, value: v });
            }
        }
    }
    let delta_reg = crate::wemv::check_regularity(w)?;
    let flat: Vec<f64> = w.iter().flatten().copied().collect();
    let total_w: f64 = flat.iter().sum();
    let weighted_mean_sq = if total_w > 0.0 {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| flat[i * n + j] * base.d(i, j).powi(2))
            .sum::<f64>()
            / total_w
    } else {
        0.0
    };
    Ok(WeightedEmvInstance {
        base,
        w: flat,
        delta_reg,
        weighted_mean_sq,
    })
}

impl WeightedEmvInstance {
    pub fn base(&self) -> &EmvInstance {
        &self.base
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.base.n + j]
    }

    /// Regularity parameter δ (every row sums to δ·n).
    pub fn delta_reg(&self) -> f64 {
        self.delta_reg
    }

    pub fn row_sum_target(&self) -> f64 {
        self.delta_reg * self.base.n as f64
    }

    /// `E_{i,j∼w} d_ij²`.
    pub fn weighted_mean_sq(&self) -> f64 {
        self.weighted_mean_sq
    }

    pub fn weights(&self) -> Vec<Vec<f64>> {
        let n = self.base.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.w(i, j)).collect())
            .collect()
    }

    /// Seed importance `Σ_j (w_ij / δn) d_ij²`.
    pub fn row_importance(&self) -> Vec<f64> {
        let n = self.base.n;
        let target = self.row_sum_target().max(f64::MIN_POSITIVE);
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.w(i, j) / target * self.base.d(i, j).powi(2))
                    .sum()
            })
            .collect()
    }
}

/// `E_{i,j∼w} (d_ij - ‖x_i - x_j‖)²`; pairs are drawn with probability
/// proportional to `w_ij`.
pub fn weighted_objective(inst: &WeightedEmvInstance, points: &[Vec<f64>]) -> Result<f64> {
    let base = &inst.base;
    check_points(points, base.n, base.k)?;
    let mut total = 0.0;
    let mut total_w = 0.0;
    for i in 0..base.n {
        for j in (i + 1)..base.n {
            let w = inst.w(i, j);
            if w == 0.0 {
                continue;
            }
            let r = base.d(i, j) - dist(&points[i], &points[j]);
            total += 2.0 * w * r * r;
            total_w += 2.0 * w;
        }
    }
    Ok(if total_w > 0.0 { total / total_w } else { 0.0 })
}

/// An entrywise ℓp rank-one approximation instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LraInstance {
    n: usize,
    m: usize,
    a: Vec<f64>,
    p: u32,
    norm_p: f64,
}

pub fn load_lra(a: &[Vec<f64>], p: u32) -> Result<LraInstance> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::OddP(p));
    }
    let n = a.len();
    let m = a.first().map_or(0, Vec::len);
    for (i, row) in a.iter().enumerate() {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: row.len(),
            });
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { i, j });
            }
        }
    }
    let flat: Vec<f64> = a.iter().flatten().copied().collect();
    let norm_p = flat.iter().map(|v| v.powi(p as i32)).sum();
    Ok(LraInstance {
        n,
        m,
        a: flat,
        p,
        norm_p,
    })
}

impl LraInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    /// `‖A‖_p^p`.
    pub fn norm_p(&self) -> f64 {
        self.norm_p
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.m).map(|j| self.a(i, j)).collect())
            .collect()
    }

    /// The same instance with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> LraInstance {
        let a: Vec<f64> = self.a.iter().map(|v| v * c).collect();
        let norm_p = a.iter().map(|v| v.powi(self.p as i32)).sum();
        LraInstance {
            a,
            norm_p,
            ..self.clone()
        }
    }
}

/// `Σ_ij (A_ij - u_i v_j)^p`.
pub fn lra_objective(inst: &LraInstance, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != inst.n {
        return Err(Error::DimensionMismatch {
            expected: inst.n,
            got: u.len(),
        });
    }
    if v.len() != inst.m {
        return Err(Error::DimensionMismatch {
            expected: inst.m,
            got: v.len(),
        });
    }
    let p = inst.p as i32;
    let mut total = 0.0;
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            total += (inst.a(i, j) - ui * vj).powi(p);
        }
    }
    Ok(total)
}

/// Output points together with their objective and a provenance record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub points: Vec<Vec<f64>>,
    pub objective: f64,
    pub provenance: Provenance,
}

impl Embedding {
    /// Builds an embedding and attaches its freshly computed objective.
    pub fn new(inst: &EmvInstance, points: Vec<Vec<f64>>) -> Result<Self> {
        let objective = emv_objective(inst, &points)?;
        Ok(Embedding {
            points,
            objective,
            provenance: Provenance::new(),
        })
    }

    pub fn new_weighted(inst: &WeightedEmvInstance, points: Vec<Vec<f64>>) -> Result<Self> {
        let objective = weighted_objective(inst, &points)?;
        Ok(Embedding {
            points,
            objective,
            provenance: Provenance::new(),
        })
    }
}

/// Rank-one factors `u vᵀ` with the attached residual `‖A - u vᵀ‖_p^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOne {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub objective: f64,
    pub provenance: Provenance,
}

impl RankOne {
    pub fn new(inst: &LraInstance, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let objective = lra_objective(inst, &u, &v)?;
        Ok(RankOne {
            u,
            v,
            objective,
            provenance: Provenance::new(),
        })
    }
}

/// A planted instance and the (normalized) points that realize it.
#[derive(Debug, Clone)]
pub struct Planted {
    pub instance: EmvInstance,
    pub points: Vec<Vec<f64>>,
}

/// Points on the integer lattice `{-2..2}^k` with `d_ij = ‖y_i - y_j‖`
/// plus optional Gaussian noise (clamped at 0).
pub fn gen_planted<R: Rng + ?Sized>(n: usize, k: usize, noise: f64, rng: &mut R) -> Result<Planted> {
    if n < 2 || k == 0 {
        return Err(Error::InvalidParameter("need n >= 2 and k >= 1".into()));
    }
    let points = loop {
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-2i32..=2) as f64).collect())
            .collect();
        if pts.iter().any(|p| p != &pts[0]) {
            break pts;
        }
    };
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let jitter: f64 = if noise > 0.0 {
                noise * Distribution::<f64>::sample(&StandardNormal, rng)
            } else {
                0.0
            };
            let v = (dist(&points[i], &points[j]) + jitter).max(0.0);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let instance = load_emv(&d, k)?;
    let s = instance.scale;
    let points = points
        .into_iter()
        .map(|p| p.into_iter().map(|v| v * s).collect())
        .collect();
    Ok(Planted { instance, points })
}

/// Two clusters on a line, each shifted by `±2^b`, with distances taken
/// from the shifted layout. Cluster one is `0..n/2`, cluster two the rest.
pub fn gen_shifted_clusters<R: Rng + ?Sized>(n: usize, b: u32, rng: &mut R) -> Result<EmvInstance> {
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    let half = n / 2;
    let shift = 2f64.powi(b as i32);
    let mut pos = Vec::with_capacity(n);
    for (lo, hi) in [(0, half), (half, n)] {
        let size = hi - lo;
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut slots: Vec<usize> = (0..(2 * size).max(1)).collect();
        for i in 0..size {
            let pick = rng.random_range(i..slots.len());
            slots.swap(i, pick);
        }
        pos.extend(slots[..size].iter().map(|&s| s as f64 + sign * shift));
    }
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (pos[i] - pos[j]).abs()).collect())
        .collect();
    load_emv(&d, 1)
}

/// Weight matrix of two disjoint cliques `0..n/2` and `n/2..n`.
pub fn two_clique_weights(n: usize) -> Vec<Vec<f64>> {
    let half = n / 2;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i != j && ((i < half) == (j < half)) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// I.i.d. dissimilarities uniform on `[1, delta]`; generally not a metric.
pub fn gen_random_nonmetric<R: Rng + ?Sized>(n: usize, delta: f64, rng: &mut R) -> Result<EmvInstance> {
    if n < 2 || !(delta >= 1.0) {
        return Err(Error::InvalidParameter("need n >= 2 and delta >= 1".into()));
    }
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if delta > 1.0 {
                rng.random_range(1.0..=delta)
            } else {
                1.0
            };
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    load_emv(&d, 1)
}

/// `A = u vᵀ + noise` with `u, v` drawn from `{-2..2}`.
pub fn gen_rank_one<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    p: u32,
    noise: f64,
    rng: &mut R,
) -> Result<LraInstance> {
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-2i32..=2) as f64).collect();
    let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2i32..=2) as f64).collect();
    let a: Vec<Vec<f64>> = u
        .iter()
        .map(|ui| {
            v.iter()
                .map(|vj| {
                    let jitter: f64 = if noise > 0.0 {
                        noise * Distribution::<f64>::sample(&StandardNormal, rng)
                    } else {
                        0.0
                    };
                    ui * vj + jitter
                })
                .collect()
        })
        .collect();
    load_lra(&a, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_normalization() {
        let inst = load_emv(&[vec![0.0, 2.0], vec![2.0, 0.0]], 1).unwrap();
        assert_eq!(inst.scale(), 0.5);
        assert_eq!(inst.delta(), 1.0);
        assert_eq!(inst.d(0, 1), 1.0);
    }

    #[test]
    fn all_zero_instance() {
        let inst = load_emv(&vec![vec![0.0; 3]; 3], 1).unwrap();
        assert_eq!(inst.mean_sq(), 0.0);
        assert_eq!(inst.delta(), 1.0);
    }

    #[test]
    fn validation_errors() {
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(load_emv(&asym, 1), Err(Error::AsymmetricInput { .. })));
        let neg = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(matches!(load_emv(&neg, 1), Err(Error::NegativeEntry { .. })));
        let diag = vec![vec![1.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(load_emv(&diag, 1), Err(Error::NonzeroDiagonal { .. })));
        let ragged = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(load_emv(&ragged, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_embedding_gives_mean_sq() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = gen_random_nonmetric(5, 3.0, &mut rng).unwrap();
        let zero = vec![vec![0.0]; 5];
        let obj = emv_objective(&inst, &zero).unwrap();
        assert!((obj - inst.mean_sq()).abs() <= 1e-12 * inst.mean_sq());
    }

    #[test]
    fn exact_fit_two_points() {
        let inst = load_emv(&[vec![0.0, 1.0], vec![1.0, 0.0]], 1).unwrap();
        let obj = emv_objective(&inst, &[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(obj, 0.0);
        assert!(matches!(
            emv_objective(&inst, &[vec![0.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn emv_objective_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = gen_random_nonmetric(3, 4.0, &mut rng).unwrap();
        let pts: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let mut naive = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let r = inst.d(i, j) - (pts[i][0] - pts[j][0]).abs();
                naive += r * r;
            }
        }
        naive /= 9.0;
        assert!((emv_objective(&inst, &pts).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn weighted_all_ones_is_offdiagonal_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = gen_random_nonmetric(4, 2.0, &mut rng).unwrap();
        let w: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let inst = load_wemv(&base.matrix(), &w, 1).unwrap();
        let pts: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let full = emv_objective(&base, &pts).unwrap();
        // n² average includes n zero diagonal terms
        let off = full * 16.0 / 12.0;
        assert!((weighted_objective(&inst, &pts).unwrap() - off).abs() < 1e-12);
    }

    #[test]
    fn weighted_single_pair_perfect_fit() {
        let d = vec![
            vec![0.0, 1.0, 3.0, 2.0],
            vec![1.0, 0.0, 5.0, 2.0],
            vec![3.0, 5.0, 0.0, 1.0],
            vec![2.0, 2.0, 1.0, 0.0],
        ];
        // perfect matching {0,1}, {2,3}: 1-regular
        let w = vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let inst = load_wemv(&d, &w, 1).unwrap();
        let pts = vec![vec![0.0], vec![1.0], vec![7.0], vec![8.0]];
        assert_eq!(weighted_objective(&inst, &pts).unwrap(), 0.0);
    }

    #[test]
    fn weighted_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let base = gen_random_nonmetric(4, 3.0, &mut rng).unwrap();
        let w = vec![
            vec![0.0, 0.5, 0.25, 0.25],
            vec![0.5, 0.0, 0.25, 0.25],
            vec![0.25, 0.25, 0.0, 0.5],
            vec![0.25, 0.25, 0.5, 0.0],
        ];
        let inst = load_wemv(&base.matrix(), &w, 1).unwrap();
        let pts: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let r = base.d(i, j) - (pts[i][0] - pts[j][0]).abs();
                num += w[i][j] * r * r;
                den += w[i][j];
            }
        }
        assert!((weighted_objective(&inst, &pts).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn lra_objective_cases() {
        let a = vec![vec![1.0, -2.0], vec![0.5, 3.0]];
        let inst = load_lra(&a, 2).unwrap();
        let z = lra_objective(&inst, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((z - inst.norm_p()).abs() < 1e-12);
        let exact = load_lra(&[vec![2.0, -4.0], vec![-1.0, 2.0]], 4).unwrap();
        assert_eq!(lra_objective(&exact, &[2.0, -1.0], &[1.0, -2.0]).unwrap(), 0.0);
        assert!(matches!(load_lra(&a, 3), Err(Error::OddP(3))));
        assert!(matches!(
            lra_objective(&inst, &[0.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lra_objective_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let inst = load_lra(&a, 4).unwrap();
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut naive = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = a[i][j] - u[i] * v[j];
                naive += r * r * r * r;
            }
        }
        let got = lra_objective(&inst, &u, &v).unwrap();
        assert!((got - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn generators_are_deterministic_and_structured() {
        let a = gen_random_nonmetric(4, 2.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_random_nonmetric(4, 2.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);

        let c = gen_shifted_clusters(6, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j && (i < 3) == (j < 3) {
                    assert!(c.d(i, j) > 0.0);
                }
            }
        }
        let w = two_clique_weights(6);
        assert_eq!(w[0].iter().sum::<f64>(), 2.0);
        assert_eq!(w[0][3], 0.0);

        let planted = gen_planted(5, 1, 0.0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let obj = emv_objective(&planted.instance, &planted.points).unwrap();
        assert!(obj < 1e-12);
    }

    #[test]
    fn denormalization_round_trip() {
        let raw = vec![
            vec![0.0, 4.0, 6.0],
            vec![4.0, 0.0, 2.0],
            vec![6.0, 2.0, 0.0],
        ];
        let inst = load_emv(&raw, 1).unwrap();
        let pts = vec![vec![0.3], vec![1.7], vec![-0.4]];
        let normalized = emv_objective(&inst, &pts).unwrap();
        let original = inst.original_objective(&inst.denormalize(&pts)).unwrap();
        let s2 = inst.scale().powi(2);
        assert!((normalized - original * s2).abs() <= 1e-12 * normalized.max(1.0));
    }
}
