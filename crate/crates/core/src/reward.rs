//! Reward functionals of the representative trader.
//!
//! The running reward is `f(t, x) = x·D(t) − h(t, x)` where `D` is the pool's
//! impact drift; it does not depend on the trader's own control. The terminal
//! reward is `−l(x)`. The control therefore enters the Hamiltonian only through
//! the linear term `z·a/σ`, which makes every maximizer an endpoint of `A`
//! unless `z = 0`.

use core::fmt;

use crate::error::{Error, Result};
use crate::math;
use crate::pool::{
    impact_drift, require_admissible, validate_admissibility, ControlInterval, MeanFlow, PoolConfig, TimeGrid,
};

/// Holding cost `h` and terminal cost `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFamily {
    /// `h(t, x) = φ_h·x²`, `l(x) = φ_l·x²`.
    Quadratic {
        phi_h: f64,
        phi_l: f64,
    },
    /// `h ≡ 0`, `l(x) = −c_l·x`, i.e. terminal reward `c_l·x`.
    LinearTerminal {
        c_l: f64,
    },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub family: CostFamily,
    /// Growth constant of the bound `|h| + |l| ≤ c₁·e^{c₁|x|}`.
    pub c1: f64,
}

impl CostModel {
    pub fn new(family: CostFamily, c1: f64) -> Result<Self> {
        let cost = CostModel { family, c1 };
        cost.validate()?;
        Ok(cost)
    }

    pub fn zero() -> Self {
        CostModel { family: CostFamily::Zero, c1: 1.0 }
    }

    pub fn quadratic(phi_h: f64, phi_l: f64) -> Result<Self> {
        Self::new(CostFamily::Quadratic { phi_h, phi_l }, 1.0)
    }

    pub fn linear_terminal(c_l: f64) -> Result<Self> {
        Self::new(CostFamily::LinearTerminal { c_l }, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid("cost.c1 must be positive"));
        }
        match self.family {
            CostFamily::Quadratic { phi_h, phi_l } => {
                if !(phi_h >= 0.0 && phi_l >= 0.0 && phi_h.is_finite() && phi_l.is_finite()) {
                    return Err(Error::invalid("cost.phi_h and cost.phi_l must be non-negative"));
                }
            }
            CostFamily::LinearTerminal { c_l } => {
                if !c_l.is_finite() {
                    return Err(Error::invalid("cost.c_l must be finite"));
                }
            }
            CostFamily::Zero => {}
        }
        Ok(())
    }

    /// Holding cost `h(t, x)`.
    #[inline]
    pub fn holding(&self, _t: f64, x: f64) -> f64 {
        match self.family {
            CostFamily::Quadratic { phi_h, .. } => phi_h * x * x,
            CostFamily::LinearTerminal { .. } | CostFamily::Zero => 0.0,
        }
    }

    /// Terminal cost `l(x)`.
    #[inline]
    pub fn terminal(&self, x: f64) -> f64 {
        match self.family {
            CostFamily::Quadratic { phi_l, .. } => phi_l * x * x,
            CostFamily::LinearTerminal { c_l } => -c_l * x,
            CostFamily::Zero => 0.0,
        }
    }

    /// `|h| + |l|` written as `a·|x|^p`.
    fn growth_monomial(&self) -> (f64, i32) {
        match self.family {
            CostFamily::Quadratic { phi_h, phi_l } => (phi_h + phi_l, 2),
            CostFamily::LinearTerminal { c_l } => (math::abs(c_l), 1),
            CostFamily::Zero => (0.0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Volatility of each trader's inventory.
    pub sigma: f64,
}

impl NoiseConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("noise.sigma must be positive"));
        }
        Ok(NoiseConfig { sigma })
    }
}

/// The static data shared by every solver: pool, control set, costs, noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub pool: PoolConfig,
    pub ctrl: ControlInterval,
    pub cost: CostModel,
    pub noise: NoiseConfig,
}

impl Model {
    pub fn new(pool: PoolConfig, ctrl: ControlInterval, cost: CostModel, noise: NoiseConfig) -> Result<Self> {
        pool.validate()?;
        ctrl.validate()?;
        cost.validate()?;
        NoiseConfig::new(noise.sigma)?;
        Ok(Model { pool, ctrl, cost, noise })
    }

    /// Fails unless the control set keeps the pool above its floor on the grid.
    pub fn require_admissible(&self, grid: &TimeGrid) -> Result<()> {
        require_admissible(&self.pool, &self.ctrl, grid)
    }

    pub fn admissibility(&self, grid: &TimeGrid) -> crate::pool::AdmissibilityReport {
        validate_admissibility(&self.pool, &self.ctrl, grid)
    }
}

/// `x·D − h(t, x)` for a precomputed impact drift `D`.
#[inline]
pub fn running_reward_with_drift(t: f64, x: f64, drift: f64, cost: &CostModel) -> f64 {
    x * drift - cost.holding(t, x)
}

/// Running reward `f(t, x) = x·D(t) − h(t, x)` against the mean flow.
pub fn running_reward(t: f64, x: f64, pool: &PoolConfig, flow: &MeanFlow, cost: &CostModel) -> Result<f64> {
    let drift = impact_drift(pool, flow, t)?;
    Ok(running_reward_with_drift(t, x, drift, cost))
}

/// Terminal reward `−l(x)`.
#[inline]
pub fn terminal_reward(x: f64, cost: &CostModel) -> f64 {
    -cost.terminal(x)
}

/// Outcome of the check `|h(t,x)| + |l(x)| ≤ c₁·e^{c₁|x|}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub c1: f64,
    /// Sample with the largest `lhs / rhs`.
    pub binding_x: f64,
    pub binding_lhs: f64,
    pub binding_rhs: f64,
    /// Whether every sampled point satisfied the bound.
    pub samples_ok: bool,
    /// Whether the bound holds beyond the sampled domain as well.
    pub tail_ok: bool,
    pub passed: bool,
}

impl fmt::Display for GrowthReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.binding_lhs <= self.binding_rhs { "≤" } else { ">" };
        write!(
            f,
            "|h|+|l| = {} {} c1·exp(c1·|x|) = {} at x = {} (c1 = {}, tail {})",
            self.binding_lhs,
            op,
            self.binding_rhs,
            self.binding_x,
            self.c1,
            if self.tail_ok { "ok" } else { "violated" }
        )
    }
}

/// Samples the growth bound on `[lo, hi]` and closes the tails analytically.
///
/// All cost families are monomials `a·|x|^p`. The ratio
/// `a·|x|^p / (c₁·e^{c₁|x|})` increases up to `|x| = p/c₁` and decreases after
/// it, so its supremum over a tail `|x| ≥ u` sits at `max(u, p/c₁)`.
pub fn validate_growth_bound(cost: &CostModel, lo: f64, hi: f64, samples: usize) -> Result<GrowthReport> {
    if samples < 2 {
        return Err(Error::invalid("growth check needs at least 2 samples"));
    }
    if !(lo < hi) {
        return Err(Error::invalid("growth check domain must satisfy lo < hi"));
    }
    let c1 = cost.c1;
    let (a, p) = cost.growth_monomial();
    let lhs_at = |x: f64| math::abs(cost.holding(0.0, x)) + math::abs(cost.terminal(x));
    let rhs_at = |x: f64| c1 * math::exp(c1 * math::abs(x));

    let mut samples_ok = true;
    let mut binding = (lo, lhs_at(lo), rhs_at(lo));
    let mut worst = f64::NEG_INFINITY;
    for s in 0..samples {
        let x = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
        let (lhs, rhs) = (lhs_at(x), rhs_at(x));
        if lhs > rhs {
            samples_ok = false;
        }
        let ratio = lhs / rhs;
        if ratio > worst {
            worst = ratio;
            binding = (x, lhs, rhs);
        }
    }

    let tail_ok = if a == 0.0 {
        true
    } else {
        let peak = f64::from(p) / c1;
        let ratio = |u: f64| a * math::powi(u, p) / (c1 * math::exp(c1 * u));
        let right = ratio(hi.max(0.0).max(peak));
        let left = ratio((-lo).max(0.0).max(peak));
        right <= 1.0 && left <= 1.0
    };

    Ok(GrowthReport {
        c1,
        binding_x: binding.0,
        binding_lhs: binding.1,
        binding_rhs: binding.2,
        samples_ok,
        tail_ok,
        passed: samples_ok && tail_ok,
    })
}

/// `f(t, x) + z·a/σ`.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian(
    t: f64,
    x: f64,
    pool: &PoolConfig,
    flow: &MeanFlow,
    cost: &CostModel,
    z: f64,
    a: f64,
    noise: &NoiseConfig,
) -> Result<f64> {
    Ok(running_reward(t, x, pool, flow, cost)? + z * a / noise.sigma)
}

/// The set of maximizers of `a ↦ z·a/σ` over `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArgmaxSet {
    /// A single endpoint of `A`.
    Unique(f64),
    /// All of `A` (the `z = 0` tie); `representative` is 0.
    Interval { lo: f64, hi: f64, representative: f64 },
}

impl ArgmaxSet {
    pub fn representative(&self) -> f64 {
        match *self {
            ArgmaxSet::Unique(a) => a,
            ArgmaxSet::Interval { representative, .. } => representative,
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self, ArgmaxSet::Unique(_))
    }
}

/// Bang-bang maximizer of the Hamiltonian and its control-dependent part
/// `max(z·a_min, z·a_max)/σ`.
pub fn optimal_control_set(z: f64, ctrl: &ControlInterval, noise: &NoiseConfig) -> (ArgmaxSet, f64) {
    let drift_part = (z * ctrl.a_min).max(z * ctrl.a_max) / noise.sigma;
    let set = if ctrl.a_max == ctrl.a_min || z < 0.0 {
        ArgmaxSet::Unique(ctrl.a_min)
    } else if z > 0.0 {
        ArgmaxSet::Unique(ctrl.a_max)
    } else {
        ArgmaxSet::Interval { lo: ctrl.a_min, hi: ctrl.a_max, representative: 0.0 }
    };
    (set, drift_part)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> PoolConfig {
        PoolConfig::new(100.0, 10.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn running_reward_examples() {
        let zero = CostModel::zero();
        assert_eq!(running_reward_with_drift(0.0, 1.0, 2.0, &zero), 2.0);
        let q1 = CostModel::quadratic(1.0, 0.0).unwrap();
        assert_eq!(running_reward_with_drift(0.0, 3.0, 0.0, &q1), -9.0);
        let q = CostModel::quadratic(0.1, 0.0).unwrap();
        let r = running_reward_with_drift(0.0, 2.0, 0.4, &q);
        assert!((r - 0.4).abs() < 1e-15);

        // through the pool: D(0) = 0.4 for q̄ ≡ 2 on k=100, X₀=10
        let g = TimeGrid::new(1.0, 4).unwrap();
        let r = running_reward(0.0, 2.0, &pool(), &MeanFlow::constant(g, 2.0), &q).unwrap();
        assert!((r - 0.4).abs() < 1e-15);
    }

    #[test]
    fn terminal_reward_examples() {
        assert_eq!(terminal_reward(2.0, &CostModel::quadratic(0.0, 1.0).unwrap()), -4.0);
        assert_eq!(terminal_reward(3.0, &CostModel::linear_terminal(1.0).unwrap()), 3.0);
        assert_eq!(terminal_reward(-7.5, &CostModel::zero()), 0.0);
    }

    #[test]
    fn growth_bound_examples() {
        let ok = CostModel::new(CostFamily::Quadratic { phi_h: 1.0, phi_l: 1.0 }, 2.0).unwrap();
        assert!(validate_growth_bound(&ok, -10.0, 10.0, 2001).unwrap().passed);

        let bad = CostModel::new(CostFamily::Quadratic { phi_h: 10.0, phi_l: 10.0 }, 0.1).unwrap();
        let report = validate_growth_bound(&bad, -10.0, 10.0, 2001).unwrap();
        assert!(!report.passed);
        assert!(!report.samples_ok);
        // the counterexample at x = 1
        assert!(20.0 > 0.1 * (0.1f64).exp());
        assert!(report.binding_lhs > report.binding_rhs);

        let zero = CostModel::new(CostFamily::Zero, 1.0).unwrap();
        assert!(validate_growth_bound(&zero, -10.0, 10.0, 11).unwrap().passed);
    }

    #[test]
    fn growth_tail_catches_violation_outside_domain() {
        // 2x² ≤ 0.5·e^{0.5|x|} holds on [-0.2, 0.2] but fails near |x| = 4.
        let cost = CostModel::new(CostFamily::Quadratic { phi_h: 1.0, phi_l: 1.0 }, 0.5).unwrap();
        let r = validate_growth_bound(&cost, -0.2, 0.2, 101).unwrap();
        assert!(r.samples_ok);
        assert!(!r.tail_ok);
        assert!(!r.passed);
    }

    #[test]
    fn growth_check_rejects_bad_arguments() {
        let c = CostModel::zero();
        assert!(validate_growth_bound(&c, 0.0, 1.0, 1).is_err());
        assert!(validate_growth_bound(&c, 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        // f-part 0.4 (x=2, D=0.4, φ_h=0.1) plus z·a/σ = 1·0.3/0.5
        let g = TimeGrid::new(1.0, 4).unwrap();
        let flow = MeanFlow::constant(g, 2.0);
        let cost = CostModel::quadratic(0.1, 0.0).unwrap();
        let noise = NoiseConfig::new(0.5).unwrap();
        let h = hamiltonian(0.0, 2.0, &pool(), &flow, &cost, 1.0, 0.3, &noise).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
        let f = running_reward(0.0, 2.0, &pool(), &flow, &cost).unwrap();
        assert_eq!(hamiltonian(0.0, 2.0, &pool(), &flow, &cost, 1.0, 0.0, &noise).unwrap(), f);
        assert_eq!(hamiltonian(0.0, 2.0, &pool(), &flow, &cost, 0.0, 0.3, &noise).unwrap(), f);
    }

    #[test]
    fn optimal_control_examples() {
        let ctrl = ControlInterval::new(-1.0, 2.0).unwrap();
        let noise = NoiseConfig::new(1.0).unwrap();
        assert_eq!(optimal_control_set(3.0, &ctrl, &noise), (ArgmaxSet::Unique(2.0), 6.0));
        assert_eq!(optimal_control_set(-1.0, &ctrl, &noise), (ArgmaxSet::Unique(-1.0), 1.0));
        let (set, drift) = optimal_control_set(0.0, &ctrl, &noise);
        assert_eq!(drift, 0.0);
        assert!(!set.is_unique());
        assert_eq!(set.representative(), 0.0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(NoiseConfig::new(0.0).is_err());
        assert!(CostModel::new(CostFamily::Zero, 0.0).is_err());
        assert!(CostModel::quadratic(-1.0, 0.0).is_err());
    }
}
