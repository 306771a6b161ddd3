//! One-dimensional alphabets used to discretize coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Geometric,
    Uniform,
    Custom,
}

/// A sorted set of coordinate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    values: Vec<f64>,
    kind: GridKind,
    epsilon: f64,
    scale: f64,
}

impl Grid {
    /// Grid from arbitrary finite values (sorted and deduplicated).
    pub fn custom(values: impl IntoIterator<Item = f64>) -> Result<Grid> {
        let mut values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid values must be finite and nonempty".into(),
            ));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(Grid {
            values,
            kind: GridKind::Custom,
            epsilon: 0.0,
            scale: 1.0,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn contains(&self, v: f64) -> bool {
        self.values.binary_search_by(|x| x.total_cmp(&v)).is_ok()
    }

    /// Largest distance between consecutive values (0 for a single value).
    pub fn max_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Keeps values with `|v| <= radius`, plus the first value beyond the
    /// radius on each side so that points inside the radius still snap with
    /// the grid's relative resolution.
    pub fn clipped(&self, radius: f64) -> Grid {
        let mut keep: Vec<f64> = self
            .values
            .iter()
            .copied()
            .filter(|v| v.abs() <= radius)
            .collect();
        if let Some(&next) = self.values.iter().find(|&&v| v > radius) {
            keep.push(next);
        }
        if let Some(&prev) = self.values.iter().rev().find(|&&v| v < -radius) {
            keep.push(prev);
        }
        keep.sort_by(f64::total_cmp);
        keep.dedup();
        Grid {
            values: keep,
            ..self.clone()
        }
    }

    /// All pairwise differences `a - b`, restricted to `[lo - hi, hi - lo]`.
    ///
    /// Anchoring a discrete solution at the origin shifts every coordinate by
    /// the anchor's value; this set keeps those shifted solutions
    /// representable. For uniform grids containing 0 it is the same lattice
    /// over twice the range.
    pub fn difference_closure(&self) -> Grid {
        let mut diffs = Vec::with_capacity(self.values.len() * self.values.len());
        if self.kind == GridKind::Uniform && self.contains(0.0) && self.values.len() > 1 {
            let step = self.values[1] - self.values[0];
            let width = self.values[self.values.len() - 1] - self.values[0];
            let c = (width / step + 1e-9).round() as i64;
            diffs.extend((-c..=c).map(|i| if i == 0 { 0.0 } else { i as f64 * step }));
        } else {
            for a in &self.values {
                for b in &self.values {
                    diffs.push(a - b);
                }
            }
        }
        diffs.sort_by(f64::total_cmp);
        diffs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        Grid {
            values: diffs,
            ..self.clone()
        }
    }

    /// Nearest grid value; exact ties go to the value of smaller magnitude.
    pub fn snap_value(&self, x: f64) -> f64 {
        let vals = &self.values;
        let idx = vals.partition_point(|&v| v < x);
        if idx == 0 {
            return vals[0];
        }
        if idx == vals.len() {
            return vals[vals.len() - 1];
        }
        let (lo, hi) = (vals[idx - 1], vals[idx]);
        let (dl, dh) = (x - lo, hi - x);
        if dl < dh {
            lo
        } else if dh < dl {
            hi
        } else if lo.abs() <= hi.abs() {
            lo
        } else {
            hi
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::from(self.values.clone())
    }
}

/// Signed geometric grid: 0 together with `±ε·√(1/k)·√mean_sq·(1+ε)^t`
/// for `t = 1..T`, `T = ⌈12·log_{1+ε}(kΔ/ε)⌉`.
pub fn build_emv_grid(eps: f64, k: usize, delta: f64, mean_sq: f64) -> Result<Grid> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadEpsilon(eps));
    }
    if k == 0 || !(delta >= 1.0) || !(mean_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need k >= 1, delta >= 1, mean_sq >= 0 (k={k}, delta={delta}, mean_sq={mean_sq})"
        )));
    }
    let scale = mean_sq.sqrt();
    if mean_sq == 0.0 {
        return Ok(Grid {
            values: vec![0.0],
            kind: GridKind::Geometric,
            epsilon: eps,
            scale,
        });
    }
    let t_max = geometric_exponent_count(eps, k, delta);
    let base = eps * (1.0 / k as f64).sqrt() * scale;
    let positive: Vec<f64> = (1..=t_max)
        .map(|t| base * (1.0 + eps).powi(t as i32))
        .collect();
    let mut values: Vec<f64> = positive.iter().rev().map(|v| -v).collect();
    values.push(0.0);
    values.extend(positive);
    Ok(Grid {
        values,
        kind: GridKind::Geometric,
        epsilon: eps,
        scale,
    })
}

/// `T = ⌈12·ln(kΔ/ε)/ln(1+ε)⌉`.
pub fn geometric_exponent_count(eps: f64, k: usize, delta: f64) -> usize {
    (12.0 * (k as f64 * delta / eps).ln() / (1.0 + eps).ln()).ceil() as usize
}

/// `{lo, lo+step, …} ∩ [lo, hi]`, with 0 inserted when `lo <= 0 <= hi`.
pub fn build_uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Grid> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || lo > hi || step <= 0.0 {
        return Err(Error::BadRange { lo, hi, step });
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut values: Vec<f64> = (0..=count)
        .map(|i| {
            let v = lo + i as f64 * step;
            if v.abs() < 1e-9 * step {
                0.0
            } else {
                v
            }
        })
        .collect();
    if lo <= 0.0 && 0.0 <= hi && !values.contains(&0.0) {
        values.push(0.0);
        values.sort_by(f64::total_cmp);
    }
    Ok(Grid {
        values,
        kind: GridKind::Uniform,
        epsilon: 0.0,
        scale: step,
    })
}

/// Lattice `{i·step : |i| <= ⌈half_width/step⌉}`, symmetric about 0.
pub fn build_symmetric_grid(half_width: f64, step: f64) -> Result<Grid> {
    if !(half_width >= 0.0) || !(step > 0.0) || !half_width.is_finite() {
        return Err(Error::BadRange {
            lo: -half_width,
            hi: half_width,
            step,
        });
    }
    let c = (half_width / step - 1e-9).ceil().max(0.0) as i64;
    let values = (-c..=c).map(|i| i as f64 * step).collect();
    Ok(Grid {
        values,
        kind: GridKind::Uniform,
        epsilon: 0.0,
        scale: step,
    })
}

/// Per-coordinate nearest grid value.
pub fn snap(point: &[f64], grid: &Grid) -> Vec<f64> {
    point.iter().map(|&x| grid.snap_value(x)).collect()
}

/// Translates an embedding so that the point minimizing `Σ_i ‖x_i - x_a‖²`
/// sits at the origin, then snaps every point. Returns the anchor index
/// and the snapped points.
pub fn snap_anchored(points: &[Vec<f64>], grid: &Grid) -> (usize, Vec<Vec<f64>>) {
    let spread = |a: usize| -> f64 {
        points
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&points[a])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
            })
            .sum()
    };
    let anchor = (0..points.len())
        .min_by(|&a, &b| spread(a).total_cmp(&spread(b)))
        .unwrap_or(0);
    let snapped = points
        .iter()
        .map(|p| {
            let shifted: Vec<f64> = p.iter().zip(&points[anchor]).map(|(x, y)| x - y).collect();
            snap(&shifted, grid)
        })
        .collect();
    (anchor, snapped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_epsilon() {
        assert!(matches!(build_emv_grid(1.0, 1, 2.0, 1.0), Err(Error::BadEpsilon(_))));
        assert!(matches!(build_emv_grid(0.0, 1, 2.0, 1.0), Err(Error::BadEpsilon(_))));
    }

    #[test]
    fn degenerate_grid() {
        let g = build_emv_grid(0.3, 2, 1.0, 0.0).unwrap();
        assert_eq!(g.values(), &[0.0]);
    }

    #[test]
    fn geometric_grid_size_matches_formula() {
        // ln(4)/ln(1.5) = 3.419…; 12× that is 41.03…, so T = 42.
        let t = (12.0 * 4f64.ln() / 1.5f64.ln()).ceil() as usize;
        assert_eq!(t, 42);
        let g = build_emv_grid(0.5, 1, 2.0, 1.0).unwrap();
        assert_eq!(g.len(), 2 * t + 1);
        assert!(g.contains(0.0));
        let vals = g.values();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
        for (a, b) in vals.iter().zip(vals.iter().rev()) {
            assert_eq!(*a, -*b);
        }
        assert!((vals[t + 1] - 0.5 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn geometric_grid_size_bound() {
        // with the constant 30 the bound only holds up to eps = 0.5
        for &eps in &[0.1, 0.25, 0.5] {
            for &k in &[1usize, 2, 3] {
                for &delta in &[1.0, 4.0, 100.0] {
                    let g = build_emv_grid(eps, k, delta, 2.0).unwrap();
                    let bound = 30.0 / eps * (delta * k as f64 / eps).ln() + 3.0;
                    assert!((g.len() as f64) <= bound, "eps={eps} k={k} delta={delta}");
                }
            }
        }
    }

    #[test]
    fn uniform_grid_cases() {
        let g = build_uniform_grid(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g.values(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let z = build_uniform_grid(0.0, 0.0, 1.0).unwrap();
        assert_eq!(z.values(), &[0.0]);
        let off = build_uniform_grid(-0.7, 1.0, 0.5).unwrap();
        assert!(off.contains(0.0));
        assert!(matches!(build_uniform_grid(1.0, 0.0, 0.5), Err(Error::BadRange { .. })));
        assert!(matches!(build_uniform_grid(0.0, 1.0, 0.0), Err(Error::BadRange { .. })));
    }

    #[test]
    fn symmetric_grid_count() {
        // n = 3, eps = 0.5, p = 4: n²/eps^p = 144, so 2·144 + 1 values.
        let r = 1.7;
        let step = 0.5f64.powi(4) / 9.0 * r;
        let g = build_symmetric_grid(r, step).unwrap();
        assert_eq!(g.len(), 2 * 144 + 1);
    }

    #[test]
    fn snap_rules() {
        let g = build_uniform_grid(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g.snap_value(0.0), 0.0);
        assert_eq!(g.snap_value(0.25), 0.0);
        assert_eq!(g.snap_value(-0.25), 0.0);
        assert_eq!(g.snap_value(0.75), 0.5);
        assert_eq!(g.snap_value(-0.75), -0.5);
        assert_eq!(g.snap_value(7.0), 1.0);
    }

    #[test]
    fn snap_error_within_half_gap() {
        let g = build_emv_grid(0.3, 1, 3.0, 2.0).unwrap();
        let vals = g.values();
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let x: f64 = rng.random_range(lo..hi);
            let s = g.snap_value(x);
            // independent scan for the enclosing gap
            let mut gap = 0.0;
            for w in vals.windows(2) {
                if w[0] <= x && x <= w[1] {
                    gap = w[1] - w[0];
                }
            }
            assert!((s - x).abs() <= gap / 2.0 + 1e-15);
            assert!((s - x).abs() <= g.max_gap() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn difference_closure_of_lattice() {
        let g = build_uniform_grid(-3.0, 3.0, 1.0).unwrap();
        let d = g.difference_closure();
        assert_eq!(d.len(), 13);
        assert_eq!(d.values()[0], -6.0);
        let c = Grid::custom([0.0, 1.0, 3.0]).unwrap().difference_closure();
        assert_eq!(c.values(), &[-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn clipping_keeps_one_value_past_radius() {
        let g = build_uniform_grid(-4.0, 4.0, 1.0).unwrap();
        let c = g.clipped(2.5);
        assert_eq!(c.values(), &[-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
