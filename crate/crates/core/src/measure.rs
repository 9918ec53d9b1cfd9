//! Finite measures on the real line and one-dimensional distances.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Probability measure with finitely many atoms, support sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Empirical measure `(1/n)·Σ δ_{x_j}`; equal samples share one atom.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::invalid("empirical measure of NaN"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut support = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in sorted {
            match support.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    support.push(x);
                    counts.push(1);
                }
            }
        }
        let weights = counts.into_iter().map(|c| c as f64 / n).collect();
        Ok(DiscreteMeasure { support, weights })
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    /// `W₁ = ∫ |F − G|`, by sweeping both cumulative weight functions.
    pub fn wasserstein1(&self, other: &DiscreteMeasure) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (mut fa, mut fb) = (0.0, 0.0);
        let mut prev: Option<f64> = None;
        let mut total = 0.0;
        while i < self.support.len() || j < other.support.len() {
            let x = match (self.support.get(i), other.support.get(j)) {
                (Some(&a), Some(&b)) => a.min(b),
                (Some(&a), None) => a,
                (None, Some(&b)) => b,
                (None, None) => unreachable!(),
            };
            if let Some(p) = prev {
                total += math::abs(fa - fb) * (x - p);
            }
            while i < self.support.len() && self.support[i] == x {
                fa += self.weights[i];
                i += 1;
            }
            while j < other.support.len() && other.support[j] == x {
                fb += other.weights[j];
                j += 1;
            }
            prev = Some(x);
        }
        total
    }
}

/// `W₁` between two measures on the same sorted support.
pub fn wasserstein1_on_support(support: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut fa = 0.0;
    let mut fb = 0.0;
    let mut total = 0.0;
    for k in 0..support.len().saturating_sub(1) {
        fa += a[k];
        fb += b[k];
        total += math::abs(fa - fb) * (support[k + 1] - support[k]);
    }
    total
}

/// Two-sample Kolmogorov–Smirnov statistic. Inputs must be sorted.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(math::abs(i as f64 / na - j as f64 / nb));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn empirical_examples() {
        let m = DiscreteMeasure::empirical(&[1.0, 1.0, 3.0]).unwrap();
        assert_eq!(m.support, vec![1.0, 3.0]);
        assert_eq!(m.weights, vec![2.0 / 3.0, 1.0 / 3.0]);
        let d = DiscreteMeasure::empirical(&[0.5]).unwrap();
        assert_eq!(d.support, vec![0.5]);
        assert_eq!(d.weights, vec![1.0]);
        assert_eq!(DiscreteMeasure::empirical(&[]), Err(Error::EmptySample));
    }

    #[test]
    fn w1_of_shifted_dirac() {
        let a = DiscreteMeasure::empirical(&[0.0]).unwrap();
        let b = DiscreteMeasure::empirical(&[2.5]).unwrap();
        assert_eq!(a.wasserstein1(&b), 2.5);
        assert_eq!(b.wasserstein1(&a), 2.5);
    }

    #[test]
    fn w1_three_point_closed_form() {
        let s = [-1.0, 0.0, 1.0];
        // (0,1,0) vs (0.5,0,0.5): CDF gaps 0.5 on [-1,0] and 0.5 on [0,1]
        assert_eq!(wasserstein1_on_support(&s, &[0.0, 1.0, 0.0], &[0.5, 0.0, 0.5]), 1.0);
        let a = DiscreteMeasure { support: s.to_vec(), weights: vec![0.2, 0.3, 0.5] };
        let b = DiscreteMeasure { support: s.to_vec(), weights: vec![0.1, 0.6, 0.3] };
        let direct = wasserstein1_on_support(&s, &a.weights, &b.weights);
        assert!((a.wasserstein1(&b) - direct).abs() < 1e-15);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert_eq!(ks_distance(&[0.0, 2.0], &[1.0, 3.0]), 0.5);
    }
}
