use serde::{Deserialize, Serialize};

/// Probability table over the joint assignments of a sorted variable tuple.
///
/// Entries are laid out in mixed radix with the first support variable most
/// significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub support: Vec<usize>,
    pub radices: Vec<usize>,
    pub probs: Vec<f64>,
}

impl Table {
    pub fn new(support: Vec<usize>, radices: Vec<usize>, probs: Vec<f64>) -> Table {
        debug_assert_eq!(support.len(), radices.len());
        debug_assert_eq!(radices.iter().product::<usize>(), probs.len());
        Table {
            support,
            radices,
            probs,
        }
    }

    pub fn zeros(support: Vec<usize>, radices: Vec<usize>) -> Table {
        let size = radices.iter().product();
        Table {
            support,
            radices,
            probs: vec![0.0; size],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Position of `var` in the support.
    pub fn position(&self, var: usize) -> Option<usize> {
        self.support.binary_search(&var).ok()
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&d, &r)| acc * r + d)
    }

    /// Writes the digits of entry `idx` into `out`.
    pub fn digits_into(&self, mut idx: usize, out: &mut [usize]) {
        for d in (0..self.radices.len()).rev() {
            out[d] = idx % self.radices[d];
            idx /= self.radices[d];
        }
    }

    pub fn digits(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.digits_into(idx, &mut out);
        out
    }

    /// Marginal on `sub`, which must be a sorted subset of the support.
    pub fn marginal(&self, sub: &[usize]) -> Table {
        if sub == self.support.as_slice() {
            return self.clone();
        }
        let pos: Vec<usize> = sub
            .iter()
            .map(|v| self.position(*v).expect("marginal on a non-subset"))
            .collect();
        let radices: Vec<usize> = pos.iter().map(|&p| self.radices[p]).collect();
        let mut out = Table::zeros(sub.to_vec(), radices);
        let mut digits = vec![0; self.radices.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.digits_into(idx, &mut digits);
            let j = pos
                .iter()
                .zip(&out.radices)
                .fold(0, |acc, (&q, &r)| acc * r + digits[q]);
            out.probs[j] += p;
        }
        out
    }

    /// Clamps tiny negatives to zero and rescales to total mass 1.
    pub fn normalize(&mut self) {
        for p in &mut self.probs {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total = self.total();
        if total > 0.0 {
            for p in &mut self.probs {
                *p /= total;
            }
        }
    }

    /// Largest absolute entry difference against a table of equal shape.
    pub fn max_abs_diff(&self, other: &Table) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
