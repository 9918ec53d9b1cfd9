use crate::error::{Error, Result};
use crate::math;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Mean and standard error of `samples`, summed in index order.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = samples.iter().map(|s| (s - mean) * (s - mean)).sum();
            math::sqrt(ss / (n as f64 - 1.0) / n as f64)
        } else {
            0.0
        };
        Ok(MeanEstimate { mean, se, n })
    }
}

/// Difference of two estimators evaluated on common random numbers.
///
/// `se` is the standard error of the per-sample differences, i.e. the
/// combined error of the two means including their covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedEstimate {
    pub first: MeanEstimate,
    pub second: MeanEstimate,
    pub diff: f64,
    pub se: f64,
}

impl PairedEstimate {
    /// Estimates `E[first] - E[second]` from paired samples.
    pub fn from_pairs(first: &[f64], second: &[f64]) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::invalid("paired samples must have equal length"));
        }
        let diffs: alloc::vec::Vec<f64> = first.iter().zip(second).map(|(a, b)| a - b).collect();
        let d = MeanEstimate::from_samples(&diffs)?;
        Ok(PairedEstimate {
            first: MeanEstimate::from_samples(first)?,
            second: MeanEstimate::from_samples(second)?,
            diff: d.mean,
            se: d.se,
        })
    }

    /// Normal-approximation interval `diff ± z·se`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.diff - z * self.se, self.diff + z * self.se)
    }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let e = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(MeanEstimate::from_samples(&[]), Err(Error::EmptySample));
    }

    #[test]
    fn identical_pairs_have_zero_se() {
        let a = [1.0, -2.0, 5.0];
        let p = PairedEstimate::from_pairs(&a, &a).unwrap();
        assert_eq!(p.diff, 0.0);
        assert_eq!(p.se, 0.0);
    }
}
