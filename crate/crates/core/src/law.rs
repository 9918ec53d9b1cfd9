use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{standard_normal, StreamRng};

/// Law `λ₀` of the initial inventories. Every family has finite exponential
/// moments of all orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialLaw {
    Dirac(f64),
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl InitialLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialLaw::Dirac(c) if !c.is_finite() => Err(Error::invalid("law0.c must be finite")),
            InitialLaw::Gaussian { mean, sd } if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) => {
                Err(Error::invalid("law0.sd must be positive"))
            }
            InitialLaw::Uniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                Err(Error::invalid("law0 requires lo < hi"))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InitialLaw::Dirac(c) => c,
            InitialLaw::Gaussian { mean, .. } => mean,
            InitialLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            InitialLaw::Dirac(_) => 0.0,
            InitialLaw::Gaussian { sd, .. } => sd,
            InitialLaw::Uniform { lo, hi } => (hi - lo) / math::sqrt(12.0),
        }
    }

    /// Draws one sample; consumes exactly one variate from `rng`.
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            InitialLaw::Dirac(c) => {
                let _: f64 = rng.random();
                c
            }
            InitialLaw::Gaussian { mean, sd } => mean + sd * standard_normal(rng),
            InitialLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// `∫ f dλ₀` by composite Simpson quadrature (exact evaluation for Dirac).
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        const PANELS: usize = 4000;
        match *self {
            InitialLaw::Dirac(c) => f(c),
            InitialLaw::Gaussian { mean, sd } => {
                let norm = 1.0 / (sd * math::sqrt(2.0 * core::f64::consts::PI));
                simpson(mean - 10.0 * sd, mean + 10.0 * sd, PANELS, |x| {
                    let z = (x - mean) / sd;
                    f(x) * norm * math::exp(-0.5 * z * z)
                })
            }
            InitialLaw::Uniform { lo, hi } => simpson(lo, hi, PANELS, &f) / (hi - lo),
        }
    }
}

fn simpson(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments_by_quadrature() {
        let law = InitialLaw::Gaussian { mean: 0.5, sd: 2.0 };
        assert!((law.expectation(|_| 1.0) - 1.0).abs() < 1e-10);
        assert!((law.expectation(|x| x) - 0.5).abs() < 1e-10);
        assert!((law.expectation(|x| (x - 0.5) * (x - 0.5)) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_and_dirac() {
        let u = InitialLaw::Uniform { lo: -1.0, hi: 3.0 };
        assert!((u.expectation(|x| x) - 1.0).abs() < 1e-12);
        assert_eq!(InitialLaw::Dirac(2.5).expectation(|x| x * x), 6.25);
    }

    #[test]
    fn validation() {
        assert!(InitialLaw::Gaussian { mean: 0.0, sd: 0.0 }.validate().is_err());
        assert!(InitialLaw::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(InitialLaw::Dirac(0.0).validate().is_ok());
    }
}
