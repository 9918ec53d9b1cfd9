//! Constant-product pool mechanics.
//!
//! The pool holds `X` risky tokens and prices them at `k / X²`. In the
//! mean-field limit its reserve is drained by the population's mean trading
//! rate `q̄`, so `X(t) = X₀ − ∫₀ᵗ q̄ ds`, and the induced permanent drift of the
//! price is `2k·q̄(t) / X(t)³`.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolConfig {
    /// Invariant product of the two reserves.
    pub k: f64,
    /// Initial reserve of the risky token.
    pub x0: f64,
    /// Floor the reserve must never cross.
    pub eps0: f64,
    /// Volatility of the additive price noise.
    pub sigma0: f64,
}

impl PoolConfig {
    pub fn new(k: f64, x0: f64, eps0: f64, sigma0: f64) -> Result<Self> {
        let pool = PoolConfig { k, x0, eps0, sigma0 };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid("pool.k must be positive"));
        }
        if !(self.eps0 > 0.0) {
            return Err(Error::invalid("pool.eps0 must be positive"));
        }
        if !(self.x0 > self.eps0 && self.x0.is_finite()) {
            return Err(Error::invalid("pool.x0 must exceed pool.eps0"));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::invalid("pool.sigma0 must be non-negative"));
        }
        Ok(())
    }
}

/// The compact control set `A = [a_min, a_max]`, which always contains 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInterval {
    pub a_min: f64,
    pub a_max: f64,
}

impl ControlInterval {
    pub fn new(a_min: f64, a_max: f64) -> Result<Self> {
        let ctrl = ControlInterval { a_min, a_max };
        ctrl.validate()?;
        Ok(ctrl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_min <= 0.0 && self.a_max >= 0.0) {
            return Err(Error::invalid("control interval must contain 0 (a_min <= 0 <= a_max)"));
        }
        if !(self.a_min.is_finite() && self.a_max.is_finite()) {
            return Err(Error::invalid("control bounds must be finite"));
        }
        Ok(())
    }

    /// `max_{a ∈ A} |a|`.
    pub fn max_abs(&self) -> f64 {
        (-self.a_min).max(self.a_max)
    }

    pub fn width(&self) -> f64 {
        self.a_max - self.a_min
    }

    pub fn contains(&self, a: f64) -> bool {
        a >= self.a_min && a <= self.a_max
    }

    /// The three candidate controls of a bang-bang policy, in ascending order.
    pub fn support(&self) -> [f64; 3] {
        [self.a_min, 0.0, self.a_max]
    }
}

/// Uniform time grid `t_j = j·T/M`, `j = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("time.horizon must be positive"));
        }
        if steps == 0 {
            return Err(Error::invalid("time.steps must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of node `j`; the last node is exactly the horizon.
    pub fn t(&self, j: usize) -> f64 {
        if j >= self.steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |j| self.t(j))
    }

    /// Index of the grid node at or immediately before `t`, clamped to the grid.
    pub fn floor_index(&self, t: f64) -> usize {
        if !(t > 0.0) {
            return 0;
        }
        let j = math::floor(t / self.dt() + 1e-9);
        if j >= self.steps as f64 {
            self.steps
        } else {
            j as usize
        }
    }
}

/// Mean control path `q̄_j = ∫_A r dq_{t_j}(r)`, piecewise linear in time.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFlow {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl MeanFlow {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("mean flow needs one value per time node"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mean flow values must be finite"));
        }
        Ok(MeanFlow { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        MeanFlow { grid, values: alloc::vec![value; grid.len()] }
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Builds a flow by sampling `f` at each node.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        MeanFlow { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Checks `a_min ≤ q̄_j ≤ a_max` at every node.
    pub fn check_within(&self, ctrl: &ControlInterval) -> Result<()> {
        match self.values.iter().position(|v| !ctrl.contains(*v)) {
            None => Ok(()),
            Some(j) => Err(Error::invalid(alloc::format!(
                "mean flow value {} at node {} lies outside [{}, {}]",
                self.values[j],
                j,
                ctrl.a_min,
                ctrl.a_max
            ))),
        }
    }

    /// Node-wise negation.
    pub fn negated(&self) -> Self {
        MeanFlow { grid: self.grid, values: self.values.iter().map(|v| -v).collect() }
    }

    /// Adds `offset` to every node.
    pub fn offset(&self, offset: f64) -> Self {
        MeanFlow { grid: self.grid, values: self.values.iter().map(|v| v + offset).collect() }
    }

    /// Value at an arbitrary `t ∈ [0, T]` by linear interpolation.
    pub fn value_at(&self, t: f64) -> f64 {
        let j = self.grid.floor_index(t);
        if j >= self.grid.steps {
            return self.values[self.grid.steps];
        }
        let s = ((t - self.grid.t(j)) / self.grid.dt()).clamp(0.0, 1.0);
        self.values[j] + s * (self.values[j + 1] - self.values[j])
    }

    /// `∫₀^{t_j} q̄ ds` at every node, by the trapezoid rule.
    pub fn cumulative(&self) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(acc);
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dt;
            out.push(acc);
        }
        out
    }

    /// `∫₀ᵗ q̄ ds`, exact for the piecewise-linear interpolant.
    pub fn integral_to(&self, t: f64) -> f64 {
        let cum = self.cumulative();
        let j = self.grid.floor_index(t);
        if j >= self.grid.steps {
            return cum[self.grid.steps];
        }
        let tau = (t - self.grid.t(j)).max(0.0);
        let qt = self.value_at(t);
        cum[j] + 0.5 * (self.values[j] + qt) * tau
    }
}

/// `k / X²`.
pub fn spot_price(pool: &PoolConfig, reserve: f64) -> Result<f64> {
    if !(reserve > 0.0) {
        return Err(Error::NonPositiveReserve(reserve));
    }
    Ok(pool.k / (reserve * reserve))
}

/// First node at which a reserve trajectory dropped below the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorBreach {
    pub node: usize,
    pub t: f64,
    pub reserve: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservePath {
    pub reserves: Vec<f64>,
    pub breach: Option<FloorBreach>,
}

impl ReservePath {
    pub fn min(&self) -> f64 {
        self.reserves.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn into_checked(self, pool: &PoolConfig) -> Result<Vec<f64>> {
        match self.breach {
            None => Ok(self.reserves),
            Some(b) => Err(Error::FloorViolation { t: b.t, reserve: b.reserve, floor: pool.eps0 }),
        }
    }
}

/// Pool reserve `X₀ − ∫₀^{t_j} q̄ ds` at every node of the flow's grid.
///
/// Floor violations are flagged in the result, never clamped.
pub fn reserve_path(pool: &PoolConfig, flow: &MeanFlow) -> ReservePath {
    let reserves: Vec<f64> = flow.cumulative().into_iter().map(|c| pool.x0 - c).collect();
    let breach = reserves.iter().position(|r| *r < pool.eps0).map(|node| FloorBreach {
        node,
        t: flow.grid.t(node),
        reserve: reserves[node],
    });
    ReservePath { reserves, breach }
}

/// Permanent-impact drift `2k·q̄(t) / (X₀ − ∫₀ᵗ q̄ ds)³`.
pub fn impact_drift(pool: &PoolConfig, flow: &MeanFlow, t: f64) -> Result<f64> {
    let reserve = pool.x0 - flow.integral_to(t);
    drift_from_reserve(pool, flow.value_at(t), reserve, t)
}

pub(crate) fn drift_from_reserve(pool: &PoolConfig, rate: f64, reserve: f64, t: f64) -> Result<f64> {
    if reserve < pool.eps0 {
        return Err(Error::FloorViolation { t, reserve, floor: pool.eps0 });
    }
    Ok(2.0 * pool.k * rate / (reserve * reserve * reserve))
}

/// Impact drift at every node of the flow's grid.
pub fn impact_drift_nodes(pool: &PoolConfig, flow: &MeanFlow) -> Result<Vec<f64>> {
    let reserves = reserve_path(pool, flow).into_checked(pool)?;
    reserves
        .iter()
        .zip(flow.values())
        .enumerate()
        .map(|(j, (r, q))| drift_from_reserve(pool, *q, *r, flow.grid.t(j)))
        .collect()
}

/// Outcome of the check `max|a| < (X₀ − ε₀)/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub max_abs_control: f64,
    pub x0: f64,
    pub eps0: f64,
    pub horizon: f64,
    /// `(X₀ − ε₀)/T`.
    pub bound: f64,
    pub passed: bool,
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.passed { "<" } else { "≥" };
        write!(
            f,
            "max|a| = {} {} ({}\u{2212}{})/{} = {}",
            self.max_abs_control, op, self.x0, self.eps0, self.horizon, self.bound
        )
    }
}

/// The control set keeps the reserve above the floor on `[0, T]` for every
/// flow it can generate iff `max|a| < (X₀ − ε₀)/T`. Equality fails.
pub fn validate_admissibility(pool: &PoolConfig, ctrl: &ControlInterval, grid: &TimeGrid) -> AdmissibilityReport {
    let max_abs_control = ctrl.max_abs();
    let bound = (pool.x0 - pool.eps0) / grid.horizon;
    AdmissibilityReport {
        max_abs_control,
        x0: pool.x0,
        eps0: pool.eps0,
        horizon: grid.horizon,
        bound,
        passed: max_abs_control < bound,
    }
}

pub(crate) fn require_admissible(pool: &PoolConfig, ctrl: &ControlInterval, grid: &TimeGrid) -> Result<()> {
    let report = validate_admissibility(pool, ctrl, grid);
    if report.passed {
        Ok(())
    } else {
        Err(Error::Admissibility(report))
    }
}

/// `2k·max|a| / ε₀³`, the largest impact drift any admissible flow can produce.
pub fn impact_bound(pool: &PoolConfig, ctrl: &ControlInterval) -> f64 {
    2.0 * pool.k * ctrl.max_abs() / (pool.eps0 * pool.eps0 * pool.eps0)
}

/// Pool price `k / X(t_j)² + σ₀·W⁰(t_j)` given the common-noise increments.
pub fn price_path(pool: &PoolConfig, flow: &MeanFlow, increments: &[f64]) -> Result<Vec<f64>> {
    if increments.len() != flow.grid.steps {
        return Err(Error::invalid("price noise needs one increment per time step"));
    }
    let reserves = reserve_path(pool, flow).into_checked(pool)?;
    let mut w = 0.0;
    let mut out = Vec::with_capacity(reserves.len());
    for (j, r) in reserves.iter().enumerate() {
        if j > 0 {
            w += increments[j - 1];
        }
        out.push(spot_price(pool, *r)? + pool.sigma0 * w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pool(k: f64, x0: f64) -> PoolConfig {
        PoolConfig::new(k, x0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn spot_price_examples() {
        assert_eq!(spot_price(&pool(100.0, 20.0), 10.0).unwrap(), 1.0);
        assert_eq!(spot_price(&pool(100.0, 20.0), 5.0).unwrap(), 4.0);
        assert_eq!(spot_price(&pool(4.0, 20.0), 2.0).unwrap(), 1.0);
    }

    #[test]
    fn spot_price_rejects_non_positive_reserve() {
        assert_eq!(spot_price(&pool(1.0, 2.0), 0.0), Err(Error::NonPositiveReserve(0.0)));
        assert!(spot_price(&pool(1.0, 2.0), -3.0).is_err());
    }

    #[test]
    fn reserve_path_examples() {
        let p = pool(100.0, 10.0);
        let g = TimeGrid::new(3.0, 3).unwrap();
        let zero = reserve_path(&p, &MeanFlow::zero(g));
        assert_eq!(zero.reserves, vec![10.0; 4]);
        assert!(zero.breach.is_none());
        let one = reserve_path(&p, &MeanFlow::constant(g, 1.0));
        assert_eq!(one.reserves, vec![10.0, 9.0, 8.0, 7.0]);

        let g2 = TimeGrid::new(2.0, 2).unwrap();
        let linear = MeanFlow::from_fn(g2, |t| t);
        assert_eq!(reserve_path(&p, &linear).reserves[2], 8.0);
    }

    #[test]
    fn reserve_path_flags_breach() {
        let p = PoolConfig::new(1.0, 2.0, 1.0, 0.0).unwrap();
        let g = TimeGrid::new(3.0, 3).unwrap();
        let r = reserve_path(&p, &MeanFlow::constant(g, 1.0));
        let b = r.breach.unwrap();
        assert_eq!(b.node, 2);
        assert_eq!(b.reserve, 0.0);
        // reported, not clamped
        assert_eq!(r.reserves[3], -1.0);
    }

    #[test]
    fn impact_drift_examples() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = pool(100.0, 10.0);
        assert_eq!(impact_drift(&p, &MeanFlow::zero(g), 0.3).unwrap(), 0.0);
        assert_eq!(impact_drift(&p, &MeanFlow::constant(g, 2.0), 0.0).unwrap(), 0.4);

        let p = PoolConfig::new(1.0, 2.0, 0.5, 0.0).unwrap();
        assert_eq!(impact_drift(&p, &MeanFlow::constant(g, 1.0), 1.0).unwrap(), 2.0);
    }

    #[test]
    fn impact_drift_guards_floor() {
        let p = PoolConfig::new(1.0, 2.0, 1.5, 0.0).unwrap();
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(matches!(impact_drift(&p, &MeanFlow::constant(g, 1.0), 1.0), Err(Error::FloorViolation { .. })));
    }

    #[test]
    fn admissibility_examples() {
        let p = pool(1.0, 10.0);
        let g = TimeGrid::new(3.0, 10).unwrap();
        let check = |a: f64| validate_admissibility(&p, &ControlInterval::new(-a, a).unwrap(), &g);
        let ok = check(2.0);
        assert!(ok.passed);
        assert_eq!(ok.bound, 3.0);
        assert!(!check(4.0).passed);
        assert!(!check(3.0).passed, "equality must fail");
        assert_eq!(alloc::format!("{}", check(4.0)), "max|a| = 4 ≥ (10\u{2212}1)/3 = 3");
    }

    #[test]
    fn impact_bound_examples() {
        let c = |a: f64| ControlInterval::new(-a, a).unwrap();
        assert_eq!(impact_bound(&PoolConfig::new(1.0, 5.0, 1.0, 0.0).unwrap(), &c(2.0)), 4.0);
        assert_eq!(impact_bound(&PoolConfig::new(100.0, 5.0, 2.0, 0.0).unwrap(), &c(1.0)), 25.0);
        assert_eq!(impact_bound(&PoolConfig::new(100.0, 5.0, 2.0, 0.0).unwrap(), &c(0.0)), 0.0);
    }

    #[test]
    fn price_path_examples() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = pool(100.0, 10.0);
        let prices = price_path(&p, &MeanFlow::zero(g), &[0.0; 4]).unwrap();
        assert_eq!(prices, vec![1.0; 5]);

        let noisy = PoolConfig::new(100.0, 10.0, 1.0, 0.5).unwrap();
        let prices = price_path(&noisy, &MeanFlow::zero(g), &[0.5; 4]).unwrap();
        assert_eq!(prices[4], 2.0);
        assert_eq!(prices[0], 1.0);

        let small = PoolConfig::new(1.0, 2.0, 0.5, 0.0).unwrap();
        let prices = price_path(&small, &MeanFlow::constant(g, 1.0), &[0.0; 4]).unwrap();
        assert_eq!(prices[4], 1.0);
    }

    #[test]
    fn price_path_checks_increment_count() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(price_path(&pool(1.0, 2.0), &MeanFlow::zero(g), &[0.0; 3]).is_err());
    }

    #[test]
    fn floor_index_is_robust_to_rounding() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        for j in 0..=10 {
            assert_eq!(g.floor_index(g.t(j)), j);
            assert_eq!(g.floor_index(j as f64 * 0.1), j);
        }
        assert_eq!(g.floor_index(-1.0), 0);
        assert_eq!(g.floor_index(7.0), 10);
    }

    #[test]
    fn integral_to_is_exact_for_piecewise_linear() {
        let g = TimeGrid::new(2.0, 2).unwrap();
        let f = MeanFlow::from_fn(g, |t| t);
        assert!((f.integral_to(1.5) - 1.125).abs() < 1e-15);
        assert!((f.integral_to(0.5) - 0.125).abs() < 1e-15);
    }
}
