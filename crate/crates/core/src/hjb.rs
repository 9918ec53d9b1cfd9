//! Representative trader's control problem against a frozen mean flow.
//!
//! The value function solves
//!
//! ```text
//! V_t + max(a_min·V_x, a_max·V_x) + ½σ²·V_xx + x·D(t) − h(t, x) = 0,   V(T, ·) = −l
//! ```
//!
//! and is computed by an explicit backward sweep. The first-order term is
//! upwinded per candidate control (forward difference for `a > 0`, backward for
//! `a < 0`), which keeps the scheme monotone under the CFL bound
//! `Δt·(σ²/Δx² + max|a|/Δx) ≤ 1`. Beyond the spatial grid `V` is continued
//! linearly, so `V_xx = 0` on the boundary rows.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::law::InitialLaw;
use crate::math;
use crate::policy::FeedbackPolicy;
use crate::pool::{impact_drift, impact_drift_nodes, ControlInterval, MeanFlow, TimeGrid};
use crate::reward::{running_reward_with_drift, terminal_reward, Model};
use crate::rng::{domain, standard_normal, substream, StreamRng};
use crate::stats::MeanEstimate;

/// `|V_x|` at or below this counts as zero when extracting the policy.
pub const TOL_Z: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
}

impl SpatialGrid {
    pub fn new(x_lo: f64, x_hi: f64, n_x: usize) -> Result<Self> {
        if !(x_lo < x_hi && x_lo.is_finite() && x_hi.is_finite()) {
            return Err(Error::invalid("grid requires x_lo < x_hi"));
        }
        if n_x < 3 {
            return Err(Error::invalid("grid.n_x must be at least 3"));
        }
        Ok(SpatialGrid { x_lo, x_hi, n_x })
    }

    /// Domain wide enough for the initial law plus everything reachable by
    /// drift and six standard deviations of noise:
    /// `μ₀ ± (6·s₀ + max|a|·T + 6·σ·√T)`.
    pub fn covering(law: &InitialLaw, ctrl: &ControlInterval, sigma: f64, horizon: f64, n_x: usize) -> Result<Self> {
        let half = 6.0 * law.sd() + ctrl.max_abs() * horizon + 6.0 * sigma * math::sqrt(horizon);
        let mid = law.mean();
        Self::new(mid - half, mid + half, n_x)
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n_x - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 >= self.n_x {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_x).map(move |i| self.x(i))
    }

    /// Nearest node to `x`, and whether `x` had to be clamped into the grid.
    pub fn nearest(&self, x: f64) -> (usize, bool) {
        if x < self.x_lo {
            return (0, true);
        }
        if x > self.x_hi {
            return (self.n_x - 1, true);
        }
        let i = math::round((x - self.x_lo) / self.dx());
        ((i as usize).min(self.n_x - 1), false)
    }

    /// Piecewise-linear interpolation of nodal `values` at `x`, constant
    /// beyond the ends.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        if x <= self.x_lo {
            return values[0];
        }
        if x >= self.x_hi {
            return values[self.n_x - 1];
        }
        let s = (x - self.x_lo) / self.dx();
        let i = (math::floor(s) as usize).min(self.n_x - 2);
        let w = s - i as f64;
        values[i] * (1.0 - w) + values[i + 1] * w
    }
}

/// Value function, its spatial derivative and the bang-bang feedback on the
/// `(t_j, x_i)` grid.
#[derive(Debug)]
pub struct ValueSurface {
    time: TimeGrid,
    space: SpatialGrid,
    ctrl: ControlInterval,
    values: Vec<f64>,
    dvdx: Vec<f64>,
    policy: Vec<f64>,
    clamps: AtomicU64,
}

impl Clone for ValueSurface {
    fn clone(&self) -> Self {
        ValueSurface {
            time: self.time,
            space: self.space,
            ctrl: self.ctrl,
            values: self.values.clone(),
            dvdx: self.dvdx.clone(),
            policy: self.policy.clone(),
            clamps: AtomicU64::new(self.clamps.load(Ordering::Relaxed)),
        }
    }
}

impl ValueSurface {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn spatial_grid(&self) -> &SpatialGrid {
        &self.space
    }

    pub fn control_interval(&self) -> &ControlInterval {
        &self.ctrl
    }

    fn at(&self, j: usize, i: usize) -> usize {
        j * self.space.n_x + i
    }

    pub fn value(&self, j: usize, i: usize) -> f64 {
        self.values[self.at(j, i)]
    }

    pub fn dvdx(&self, j: usize, i: usize) -> f64 {
        self.dvdx[self.at(j, i)]
    }

    pub fn policy(&self, j: usize, i: usize) -> f64 {
        self.policy[self.at(j, i)]
    }

    /// Value row at time node `j`.
    pub fn values_at(&self, j: usize) -> &[f64] {
        let n = self.space.n_x;
        &self.values[j * n..(j + 1) * n]
    }

    /// `V(t_j, x)` interpolated linearly between nodes.
    pub fn value_interpolated(&self, j: usize, x: f64) -> f64 {
        self.space.interpolate(self.values_at(j), x)
    }

    /// Number of feedback lookups whose state fell outside the grid.
    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }

    pub fn reset_clamp_count(&self) {
        self.clamps.store(0, Ordering::Relaxed);
    }
}

impl FeedbackPolicy for ValueSurface {
    fn control(&self, t: f64, x: f64) -> f64 {
        feedback_policy(self, t, x)
    }
}

/// Bang-bang control from the sign of `V_x`, with the `z = 0` tie sent to 0.
pub(crate) fn bang_bang(slope: f64, ctrl: &ControlInterval) -> f64 {
    if slope > TOL_Z {
        ctrl.a_max
    } else if slope < -TOL_Z {
        ctrl.a_min
    } else {
        0.0
    }
}

/// Second-order one-sided derivative on the ends, central inside. A node
/// that is a discrete local maximum gets slope 0: no one-sided move improves
/// on staying, which is also the upwind scheme's own argmax there.
fn spatial_derivative(v: &[f64], dx: f64, out: &mut [f64]) {
    let n = v.len();
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    for i in 1..n - 1 {
        out[i] = if v[i - 1] <= v[i] && v[i + 1] <= v[i] { 0.0 } else { (v[i + 1] - v[i - 1]) / (2.0 * dx) };
    }
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx);
}

/// One-sided differences `(backward, forward)` and the second difference at
/// node `i`, with linear continuation past either end.
#[inline]
pub(crate) fn stencil(v: &[f64], i: usize, dx: f64) -> (f64, f64, f64) {
    let n = v.len();
    if i == 0 {
        let d = (v[1] - v[0]) / dx;
        (d, d, 0.0)
    } else if i == n - 1 {
        let d = (v[n - 1] - v[n - 2]) / dx;
        (d, d, 0.0)
    } else {
        let bwd = (v[i] - v[i - 1]) / dx;
        let fwd = (v[i + 1] - v[i]) / dx;
        (bwd, fwd, (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx))
    }
}

/// `max_a a·V_x` with the derivative upwinded per candidate control.
#[inline]
pub(crate) fn upwind_hamiltonian(ctrl: &ControlInterval, bwd: f64, fwd: f64) -> f64 {
    (ctrl.a_min * bwd).max(0.0).max(ctrl.a_max * fwd)
}

pub(crate) fn cfl_number(dt: f64, dx: f64, sigma: f64, max_abs: f64) -> f64 {
    dt * (sigma * sigma / (dx * dx) + max_abs / dx)
}

/// Solves the HJB equation backward on the flow's time grid.
pub fn solve_hjb(model: &Model, flow: &MeanFlow, space: &SpatialGrid) -> Result<ValueSurface> {
    let time = *flow.grid();
    model.require_admissible(&time)?;
    flow.check_within(&model.ctrl)?;
    let dt = time.dt();
    let dx = space.dx();
    let sigma = model.noise.sigma;
    let cfl = cfl_number(dt, dx, sigma, model.ctrl.max_abs());
    if cfl > 1.0 {
        return Err(Error::Cfl { number: cfl });
    }
    let drift = impact_drift_nodes(&model.pool, flow)?;

    let n = space.n_x;
    let m = time.steps;
    let xs: Vec<f64> = space.nodes().collect();
    let mut values = alloc::vec![0.0; (m + 1) * n];
    for (i, x) in xs.iter().enumerate() {
        values[m * n + i] = terminal_reward(*x, &model.cost);
    }

    let half_var = 0.5 * sigma * sigma;
    for j in (0..m).rev() {
        let t = time.t(j);
        let (head, tail) = values.split_at_mut((j + 1) * n);
        let next = &tail[..n];
        let row = &mut head[j * n..];
        for i in 0..n {
            let (bwd, fwd, second) = stencil(next, i, dx);
            let ham = upwind_hamiltonian(&model.ctrl, bwd, fwd);
            let f = running_reward_with_drift(t, xs[i], drift[j], &model.cost);
            let v = next[i] + dt * (ham + half_var * second + f);
            if !v.is_finite() {
                return Err(Error::NonFinite { t, x: xs[i] });
            }
            row[i] = v;
        }
    }

    let mut dvdx = alloc::vec![0.0; (m + 1) * n];
    let mut policy = alloc::vec![0.0; (m + 1) * n];
    for j in 0..=m {
        let range = j * n..(j + 1) * n;
        spatial_derivative(&values[range.clone()], dx, &mut dvdx[range.clone()]);
        for k in range {
            policy[k] = bang_bang(dvdx[k], &model.ctrl);
        }
    }

    Ok(ValueSurface { time, space: *space, ctrl: model.ctrl, values, dvdx, policy, clamps: AtomicU64::new(0) })
}

/// Feedback `α̂(t, x)`: time floored to its grid node, `x` snapped to the
/// nearest node. States outside the grid are clamped and counted.
pub fn feedback_policy(surface: &ValueSurface, t: f64, x: f64) -> f64 {
    let j = surface.time.floor_index(t);
    let (i, clamped) = surface.space.nearest(x);
    if clamped {
        surface.clamps.fetch_add(1, Ordering::Relaxed);
    }
    surface.policy(j, i)
}

/// Euler–Maruyama path of `dX = α(t, X)dt + σ dW` from `x0`, returning
/// `Σ_j f(t_j, X_j)·Δt − l(X_M)`. Draws exactly `M` normals from `rng`.
pub(crate) fn path_payoff(
    policy: &dyn FeedbackPolicy,
    model: &Model,
    drift: &[f64],
    time: &TimeGrid,
    x0: f64,
    rng: &mut StreamRng,
) -> f64 {
    let dt = time.dt();
    let sd = model.noise.sigma * math::sqrt(dt);
    let mut x = x0;
    let mut payoff = 0.0;
    for (j, d) in drift.iter().enumerate().take(time.steps) {
        let t = time.t(j);
        let a = policy.control(t, x);
        payoff += running_reward_with_drift(t, x, *d, &model.cost) * dt;
        x += a * dt + sd * standard_normal(rng);
    }
    payoff + terminal_reward(x, &model.cost)
}

/// Per-path payoffs of `policy` under the frozen `flow`; path `p` uses its
/// own substream, so two policies evaluated with one seed share all noise.
pub fn policy_payoffs(
    policy: &dyn FeedbackPolicy,
    model: &Model,
    flow: &MeanFlow,
    law0: &InitialLaw,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_paths < 100 {
        return Err(Error::invalid("policy evaluation needs at least 100 paths"));
    }
    law0.validate()?;
    let time = *flow.grid();
    let drift = impact_drift_nodes(&model.pool, flow)?;
    Ok(map_indexed(n_paths, |p| {
        let mut rng = substream(seed, domain::POLICY_PATHS, p as u64);
        let x0 = law0.sample(&mut rng);
        path_payoff(policy, model, &drift, &time, x0, &mut rng)
    }))
}

/// Monte Carlo estimate of `J(α) = E[∫f dt − l(X_T)]`.
pub fn policy_evaluate(
    policy: &dyn FeedbackPolicy,
    model: &Model,
    flow: &MeanFlow,
    law0: &InitialLaw,
    n_paths: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    MeanEstimate::from_samples(&policy_payoffs(policy, model, flow, law0, n_paths, seed)?)
}

/// Largest instance the dynamic-programming oracle accepts.
pub const ORACLE_MAX_NODES: usize = 101;
pub const ORACLE_MAX_STEPS: usize = 64;

/// Exact dynamic programming on a controlled trinomial chain; returns `V(0, ·)`.
///
/// From node `x_i` under control `a` the chain moves up, down or stays with
/// probabilities `σ²Δt/(2Δx²) + a⁺Δt/Δx`, `σ²Δt/(2Δx²) + a⁻Δt/Δx` and the
/// remainder, which reproduces the drift `a·Δt` exactly and the variance
/// `σ²Δt` to first order. Each node maximizes the one-step expectation over
/// `{a_min, 0, a_max}` exhaustively. Values beyond the grid edge are
/// continued linearly.
pub fn brute_force_value(model: &Model, flow: &MeanFlow, space: &SpatialGrid, time: &TimeGrid) -> Result<Vec<f64>> {
    if space.n_x > ORACLE_MAX_NODES || time.steps > ORACLE_MAX_STEPS {
        return Err(Error::invalid("oracle instance too large (n_x <= 101, steps <= 64)"));
    }
    let dt = time.dt();
    let dx = space.dx();
    let sigma = model.noise.sigma;
    let number = cfl_number(dt, dx, sigma, model.ctrl.max_abs());
    if number > 1.0 {
        return Err(Error::ChainConsistency { number });
    }
    let n = space.n_x;
    let xs: Vec<f64> = space.nodes().collect();
    let controls = model.ctrl.support();
    let transitions: Vec<[f64; 3]> = controls
        .iter()
        .map(|&a| {
            let diffuse = sigma * sigma * dt / (2.0 * dx * dx);
            let up = (diffuse + a.max(0.0) * dt / dx).clamp(0.0, 1.0);
            let down = (diffuse + (-a).max(0.0) * dt / dx).clamp(0.0, 1.0);
            let stay = (1.0 - up - down).clamp(0.0, 1.0);
            let total = up + down + stay;
            [down / total, stay / total, up / total]
        })
        .collect();

    let mut v: Vec<f64> = xs.iter().map(|x| terminal_reward(*x, &model.cost)).collect();
    let mut next = alloc::vec![0.0; n];
    for j in (0..time.steps).rev() {
        let t = time.t(j);
        let drift = impact_drift(&model.pool, flow, t)?;
        for i in 0..n {
            let below = if i == 0 { 2.0 * v[0] - v[1] } else { v[i - 1] };
            let above = if i == n - 1 { 2.0 * v[n - 1] - v[n - 2] } else { v[i + 1] };
            let reward = running_reward_with_drift(t, xs[i], drift, &model.cost) * dt;
            let best = transitions
                .iter()
                .map(|p| reward + p[0] * below + p[1] * v[i] + p[2] * above)
                .fold(f64::NEG_INFINITY, f64::max);
            next[i] = best;
        }
        core::mem::swap(&mut v, &mut next);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ConstantPolicy;
    use crate::pool::PoolConfig;
    use crate::reward::{CostModel, NoiseConfig};

    fn model(cost: CostModel, sigma: f64) -> Model {
        Model::new(
            PoolConfig::new(100.0, 10.0, 1.0, 0.0).unwrap(),
            ControlInterval::new(-1.0, 1.0).unwrap(),
            cost,
            NoiseConfig::new(sigma).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_data_gives_zero_surface() {
        let m = model(CostModel::zero(), 0.3);
        let flow = MeanFlow::zero(TimeGrid::new(1.0, 40).unwrap());
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let s = solve_hjb(&m, &flow, &grid).unwrap();
        for j in 0..=40 {
            for i in 0..61 {
                assert_eq!(s.value(j, i), 0.0);
                assert_eq!(s.policy(j, i), 0.0);
            }
        }
    }

    #[test]
    fn linear_terminal_closed_form() {
        let m = model(CostModel::linear_terminal(1.0).unwrap(), 0.3);
        let time = TimeGrid::new(1.0, 40).unwrap();
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let s = solve_hjb(&m, &MeanFlow::zero(time), &grid).unwrap();
        for j in 0..=40 {
            for i in 1..60 {
                let exact = grid.x(i) + (1.0 - time.t(j));
                assert!((s.value(j, i) - exact).abs() < 1e-3);
                assert_eq!(s.policy(j, i), 1.0);
            }
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let m = model(CostModel::zero(), 1.0);
        let flow = MeanFlow::zero(TimeGrid::new(1.0, 4).unwrap());
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        assert!(matches!(solve_hjb(&m, &flow, &grid), Err(Error::Cfl { .. })));
    }

    #[test]
    fn inadmissible_control_set_is_rejected() {
        let mut m = model(CostModel::zero(), 0.3);
        m.ctrl = ControlInterval::new(-9.0, 9.0).unwrap();
        let flow = MeanFlow::zero(TimeGrid::new(1.0, 400).unwrap());
        let grid = SpatialGrid::new(-3.0, 3.0, 31).unwrap();
        assert!(matches!(solve_hjb(&m, &flow, &grid), Err(Error::Admissibility(_))));
    }

    #[test]
    fn feedback_clamps_and_counts() {
        let m = model(CostModel::linear_terminal(1.0).unwrap(), 0.3);
        let flow = MeanFlow::zero(TimeGrid::new(1.0, 40).unwrap());
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let s = solve_hjb(&m, &flow, &grid).unwrap();
        assert_eq!(feedback_policy(&s, 0.5, 0.2), 1.0);
        assert_eq!(s.clamp_count(), 0);
        assert_eq!(feedback_policy(&s, 0.5, 50.0), 1.0);
        assert_eq!(feedback_policy(&s, 2.0, -50.0), 1.0);
        assert_eq!(s.clamp_count(), 2);
    }

    #[test]
    fn too_few_paths_is_an_error() {
        let m = model(CostModel::zero(), 0.3);
        let flow = MeanFlow::zero(TimeGrid::new(1.0, 10).unwrap());
        let r = policy_evaluate(&ConstantPolicy(0.0), &m, &flow, &InitialLaw::Dirac(0.0), 99, 1);
        assert!(r.is_err());
    }

    #[test]
    fn oracle_rejects_large_or_inconsistent_instances() {
        let m = model(CostModel::zero(), 0.3);
        let time = TimeGrid::new(1.0, 40).unwrap();
        let flow = MeanFlow::zero(time);
        let big = SpatialGrid::new(-3.0, 3.0, 201).unwrap();
        assert!(brute_force_value(&m, &flow, &big, &time).is_err());
        let coarse_time = TimeGrid::new(1.0, 2).unwrap();
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        assert!(matches!(
            brute_force_value(&m, &MeanFlow::zero(coarse_time), &grid, &coarse_time),
            Err(Error::ChainConsistency { .. })
        ));
    }

    #[test]
    fn interpolation_between_nodes() {
        let g = SpatialGrid::new(0.0, 2.0, 3).unwrap();
        let v = [0.0, 1.0, 4.0];
        assert_eq!(g.interpolate(&v, 0.5), 0.5);
        assert_eq!(g.interpolate(&v, 1.5), 2.5);
        assert_eq!(g.interpolate(&v, -1.0), 0.0);
        assert_eq!(g.interpolate(&v, 9.0), 4.0);
    }
}
