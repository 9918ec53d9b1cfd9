//! Mean-field equilibrium by fixed-point iteration on the control flow.
//!
//! One sweep of the map: freeze the mean flow `q̄`, solve the representative
//! trader's HJB, push a particle cloud forward under the resulting feedback,
//! and read off the induced law of controls at each node. Since the feedback
//! is bang-bang, that law lives on `{a_min, 0, a_max}` and its mean is the new
//! candidate flow. Iterates are blended by damped Picard steps or by a running
//! (fictitious-play) average until the flow and the three-point laws stop
//! moving.
//!
//! Particles reuse the same seed on every iteration, so the map is a
//! deterministic function of the flow.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::hjb::{policy_payoffs, solve_hjb, SpatialGrid, ValueSurface};
use crate::law::InitialLaw;
use crate::math;
use crate::measure::{ks_distance, wasserstein1_on_support};
use crate::policy::FeedbackPolicy;
use crate::pool::{impact_drift_nodes, reserve_path, ControlInterval, MeanFlow, TimeGrid};
use crate::reward::{running_reward_with_drift, terminal_reward, validate_growth_bound, Model, NoiseConfig};
use crate::rng::{domain, standard_normal, substream};
use crate::stats::{MeanEstimate, PairedEstimate};

/// Particle approximation of the state law at each time node.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    time: TimeGrid,
    count: usize,
    states: Vec<f64>,
}

impl ParticleCloud {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Particle states at node `j`, in particle order.
    pub fn at(&self, j: usize) -> &[f64] {
        &self.states[j * self.count..(j + 1) * self.count]
    }

    pub fn mean_at(&self, j: usize) -> MeanEstimate {
        MeanEstimate::from_samples(self.at(j)).expect("cloud is non-empty")
    }
}

/// Euler–Maruyama propagation of `P` particles under `dX = α(t, X)dt + σ dW`.
pub fn propagate_state_law(
    policy: &dyn FeedbackPolicy,
    noise: &NoiseConfig,
    law0: &InitialLaw,
    time: &TimeGrid,
    particles: usize,
    seed: u64,
) -> Result<ParticleCloud> {
    if particles < 100 {
        return Err(Error::invalid("state-law propagation needs at least 100 particles"));
    }
    law0.validate()?;
    let dt = time.dt();
    let sd = noise.sigma * math::sqrt(dt);
    let paths: Vec<Vec<f64>> = map_indexed(particles, |p| {
        let mut rng = substream(seed, domain::PARTICLES, p as u64);
        let mut x = law0.sample(&mut rng);
        let mut path = Vec::with_capacity(time.len());
        path.push(x);
        for j in 0..time.steps {
            let a = policy.control(time.t(j), x);
            x += a * dt + sd * standard_normal(&mut rng);
            path.push(x);
        }
        path
    });
    let mut states = alloc::vec![0.0; time.len() * particles];
    for (p, path) in paths.iter().enumerate() {
        for (j, x) in path.iter().enumerate() {
            states[j * particles + p] = *x;
        }
    }
    Ok(ParticleCloud { time: *time, count: particles, states })
}

/// Per-node law of the bang-bang control on `{a_min, 0, a_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlLawFlow {
    time: TimeGrid,
    support: [f64; 3],
    weights: Vec<[f64; 3]>,
    means: Vec<f64>,
}

impl ControlLawFlow {
    /// Builds the flow from per-node weights `(w_min, w_zero, w_max)`.
    pub fn from_weights(time: TimeGrid, ctrl: &ControlInterval, weights: Vec<[f64; 3]>) -> Result<Self> {
        if weights.len() != time.len() {
            return Err(Error::invalid("control law needs one weight triple per node"));
        }
        for w in &weights {
            let sum = w[0] + w[1] + w[2];
            if w.iter().any(|x| !(*x >= 0.0)) || math::abs(sum - 1.0) > 1e-12 {
                return Err(Error::invalid("control-law weights must be non-negative and sum to 1"));
            }
        }
        let support = ctrl.support();
        let means = weights.iter().map(|w| w[0] * support[0] + w[2] * support[2]).collect();
        Ok(ControlLawFlow { time, support, weights, means })
    }

    /// The laws that put all mass on the zero control.
    pub fn idle(time: TimeGrid, ctrl: &ControlInterval) -> Self {
        Self::from_weights(time, ctrl, alloc::vec![[0.0, 1.0, 0.0]; time.len()]).expect("valid weights")
    }

    /// Laws on `{a_min, 0}` or `{0, a_max}` with the given node means.
    pub fn from_means(ctrl: &ControlInterval, flow: &MeanFlow) -> Result<Self> {
        flow.check_within(ctrl)?;
        let weights = flow
            .values()
            .iter()
            .map(|&q| {
                if q > 0.0 {
                    let w = q / ctrl.a_max;
                    [0.0, 1.0 - w, w]
                } else if q < 0.0 {
                    let w = q / ctrl.a_min;
                    [w, 1.0 - w, 0.0]
                } else {
                    [0.0, 1.0, 0.0]
                }
            })
            .collect();
        Self::from_weights(*flow.grid(), ctrl, weights)
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn support(&self) -> [f64; 3] {
        self.support
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean_flow(&self) -> MeanFlow {
        MeanFlow::new(self.time, self.means.clone()).expect("means are finite")
    }

    /// `W₁` between the laws at node `j`.
    pub fn wasserstein1_at(&self, other: &ControlLawFlow, j: usize) -> f64 {
        wasserstein1_on_support(&self.support, &self.weights[j], &other.weights[j])
    }

    /// `max_j W₁(self_j, other_j)`.
    pub fn max_wasserstein1(&self, other: &ControlLawFlow) -> f64 {
        (0..self.weights.len()).map(|j| self.wasserstein1_at(other, j)).fold(0.0, f64::max)
    }

    fn blend(&self, other: &ControlLawFlow, omega: f64) -> Self {
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| {
                let mut w = [0.0; 3];
                for k in 0..3 {
                    w[k] = (1.0 - omega) * a[k] + omega * b[k];
                }
                w
            })
            .collect::<Vec<_>>();
        let means = self.means.iter().zip(&other.means).map(|(a, b)| (1.0 - omega) * a + omega * b).collect();
        ControlLawFlow { time: self.time, support: self.support, weights, means }
    }
}

/// Empirical law of `α(t_j, X_j)` over the cloud at each node.
pub fn induced_control_law(
    policy: &dyn FeedbackPolicy,
    cloud: &ParticleCloud,
    ctrl: &ControlInterval,
) -> Result<ControlLawFlow> {
    let time = cloud.time;
    let n = cloud.count as f64;
    let mut weights = Vec::with_capacity(time.len());
    for j in 0..time.len() {
        let t = time.t(j);
        let mut counts = [0usize; 3];
        for &x in cloud.at(j) {
            let a = policy.control(t, x);
            let k = if a == 0.0 {
                1
            } else if a == ctrl.a_max {
                2
            } else if a == ctrl.a_min {
                0
            } else {
                return Err(Error::invalid("policy returned a control outside {a_min, 0, a_max}"));
            };
            counts[k] += 1;
        }
        weights.push([counts[0] as f64 / n, counts[1] as f64 / n, counts[2] as f64 / n]);
    }
    // renormalize so the sum is 1 to within one ulp
    for w in &mut weights {
        w[1] = (1.0 - w[0] - w[2]).max(0.0);
    }
    ControlLawFlow::from_weights(time, ctrl, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointMode {
    /// `q̄ ← (1 − ω)·q̄ + ω·q̄'`.
    PicardDamped,
    /// `q̄ ← (k·q̄ + q̄')/(k + 1)` on iteration `k`.
    FictitiousPlay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mode: FixedPointMode,
    pub particles: usize,
    pub seed: u64,
    /// Starting control law; all mass on 0 when absent.
    pub initial: Option<ControlLawFlow>,
}

impl FixedPointConfig {
    /// Damping 0.5, tolerance `10⁻³·(a_max − a_min)`, 50 iterations, 20 000
    /// particles.
    pub fn defaults(ctrl: &ControlInterval) -> Self {
        FixedPointConfig {
            damping: 0.5,
            tol: 1e-3 * ctrl.width().max(f64::MIN_POSITIVE),
            max_iter: 50,
            mode: FixedPointMode::PicardDamped,
            particles: 20_000,
            seed: 0,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("mfg.damping must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("mfg.tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("mfg.max_iter must be at least 1"));
        }
        if self.particles < 100 {
            return Err(Error::invalid("mfg.particles must be at least 100"));
        }
        Ok(())
    }
}

/// One fixed-point step: the updated law and the residual it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub law: ControlLawFlow,
    pub residual: f64,
    /// Blending weight actually applied (after any floor rejections).
    pub omega: f64,
}

#[derive(Debug, Clone)]
pub struct MfgSolution {
    /// Value surface and feedback solved against `frozen_flow`.
    pub surface: ValueSurface,
    /// Flow the final surface was solved against.
    pub frozen_flow: MeanFlow,
    /// Control law induced by the final feedback.
    pub control_law: ControlLawFlow,
    /// Mean of `control_law`: the equilibrium flow `q̄*`.
    pub flow: MeanFlow,
    pub cloud: ParticleCloud,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl MfgSolution {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(f64::INFINITY, |r| r.residual)
    }
}

const MAX_REJECTIONS: usize = 5;

/// Iterates the best-response map on the control flow until it settles.
///
/// Returns the solution with `converged = false` when `max_iter` runs out.
pub fn solve_mfg(
    model: &Model,
    law0: &InitialLaw,
    space: &SpatialGrid,
    time: &TimeGrid,
    fp: &FixedPointConfig,
) -> Result<MfgSolution> {
    fp.validate()?;
    law0.validate()?;
    model.require_admissible(time)?;
    let growth = validate_growth_bound(&model.cost, space.x_lo, space.x_hi, 1001)?;
    if !growth.passed {
        return Err(Error::GrowthBound(growth));
    }

    let mut law = match &fp.initial {
        Some(init) if init.time_grid() == time => init.clone(),
        Some(_) => return Err(Error::invalid("initial control law must live on the solver's time grid")),
        None => ControlLawFlow::idle(*time, &model.ctrl),
    };
    let mut history = Vec::new();
    let mut last = None;

    for k in 0..fp.max_iter {
        let frozen = law.mean_flow();
        let surface = solve_hjb(model, &frozen, space)?;
        let cloud = propagate_state_law(&surface, &model.noise, law0, time, fp.particles, fp.seed)?;
        let induced = induced_control_law(&surface, &cloud, &model.ctrl)?;

        let mut omega = match fp.mode {
            FixedPointMode::PicardDamped => fp.damping,
            FixedPointMode::FictitiousPlay => 1.0 / (k as f64 + 1.0),
        };
        let mut rejections = 0;
        let next = loop {
            let candidate = law.blend(&induced, omega);
            if reserve_path(&model.pool, &candidate.mean_flow()).breach.is_none() {
                break candidate;
            }
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(Error::IterateRejected { rejections });
            }
            omega *= 0.5;
        };

        let flow_step = next.means().iter().zip(law.means()).map(|(a, b)| math::abs(a - b)).fold(0.0, f64::max);
        let residual = flow_step + next.max_wasserstein1(&law);
        history.push(IterationRecord { iter: k + 1, law: next.clone(), residual, omega });
        law = next;
        let converged = residual <= fp.tol;
        last = Some((surface, frozen, induced, cloud));
        if converged {
            break;
        }
    }

    let (surface, frozen_flow, control_law, cloud) = last.expect("at least one iteration");
    let converged = history.last().is_some_and(|r| r.residual <= fp.tol);
    Ok(MfgSolution { surface, frozen_flow, flow: control_law.mean_flow(), control_law, cloud, history, converged })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `J(re-solved feedback) − J(stored feedback)` under the equilibrium flow.
    pub best_response_gap: PairedEstimate,
    /// `max_j W₁` between the stored control law and a freshly induced one.
    pub control_law_w1: f64,
    /// Tolerance applied to `control_law_w1`: `0.02·(a_max − a_min)`.
    pub control_law_tolerance: f64,
    /// `max_j` Kolmogorov–Smirnov distance between stored and fresh clouds.
    pub state_law_ks: f64,
}

impl VerificationReport {
    pub fn control_law_consistent(&self) -> bool {
        self.control_law_w1 <= self.control_law_tolerance
    }
}

/// Checks the three defining properties of an equilibrium: the stored
/// feedback is a best response to the equilibrium flow, and it reproduces
/// both the control law and the state law on fresh noise.
pub fn verify_solution(
    sol: &MfgSolution,
    model: &Model,
    law0: &InitialLaw,
    n_paths: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let space = *sol.surface.spatial_grid();
    let time = *sol.cloud.time_grid();
    let resolved = solve_hjb(model, &sol.flow, &space)?;
    let stored_pay = policy_payoffs(&sol.surface, model, &sol.flow, law0, n_paths, seed)?;
    let resolved_pay = policy_payoffs(&resolved, model, &sol.flow, law0, n_paths, seed)?;
    let best_response_gap = PairedEstimate::from_pairs(&resolved_pay, &stored_pay)?;

    let fresh = propagate_state_law(&sol.surface, &model.noise, law0, &time, sol.cloud.count(), seed)?;
    let fresh_law = induced_control_law(&sol.surface, &fresh, &model.ctrl)?;
    let control_law_w1 = sol.control_law.max_wasserstein1(&fresh_law);

    let mut state_law_ks: f64 = 0.0;
    for j in 0..time.len() {
        let mut a = sol.cloud.at(j).to_vec();
        let mut b = fresh.at(j).to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        state_law_ks = state_law_ks.max(ks_distance(&a, &b));
    }

    Ok(VerificationReport {
        best_response_gap,
        control_law_w1,
        control_law_tolerance: 0.02 * model.ctrl.width(),
        state_law_ks,
    })
}

/// Largest `max|a|/σ` accepted by the likelihood-ratio check.
pub const GIRSANOV_DRIFT_CAP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GirsanovReport {
    /// Payoff estimated by simulating the controlled dynamics.
    pub strong: MeanEstimate,
    /// Payoff estimated on driftless paths weighted by the stochastic exponential.
    pub reweighted: MeanEstimate,
    /// Standard error of the per-path difference of the two estimators.
    pub combined_se: f64,
    /// `(Σ L)² / Σ L²` for the likelihood ratios `L`.
    pub effective_sample_size: f64,
    /// Set when the effective sample size drops below 5% of the paths.
    pub degenerate_weights: bool,
}

impl GirsanovReport {
    pub fn difference(&self) -> f64 {
        self.strong.mean - self.reweighted.mean
    }
}

/// Estimates `J(α)` twice: by strong simulation of `dX = α dt + σ dW`, and on
/// the driftless `dX = σ dW` reweighted by
/// `exp(Σ σ⁻¹α ΔW − ½ Σ σ⁻²α² Δt)`. Both estimators share the noise.
pub fn girsanov_reward_check(
    model: &Model,
    flow: &MeanFlow,
    policy: &dyn FeedbackPolicy,
    law0: &InitialLaw,
    n_paths: usize,
    seed: u64,
) -> Result<GirsanovReport> {
    let sigma = model.noise.sigma;
    let ratio = model.ctrl.max_abs() / sigma;
    if ratio > GIRSANOV_DRIFT_CAP {
        return Err(Error::DriftCap { ratio, cap: GIRSANOV_DRIFT_CAP });
    }
    if n_paths < 100 {
        return Err(Error::invalid("likelihood-ratio check needs at least 100 paths"));
    }
    law0.validate()?;
    let time = *flow.grid();
    let dt = time.dt();
    let sqrt_dt = math::sqrt(dt);
    let drift = impact_drift_nodes(&model.pool, flow)?;

    let rows: Vec<(f64, f64, f64)> = map_indexed(n_paths, |p| {
        let mut rng = substream(seed, domain::GIRSANOV, p as u64);
        let x0 = law0.sample(&mut rng);
        let (mut xs, mut xw) = (x0, x0);
        let (mut pay_s, mut pay_w, mut log_l) = (0.0, 0.0, 0.0);
        for (j, d) in drift.iter().enumerate().take(time.steps) {
            let t = time.t(j);
            let dw = sqrt_dt * standard_normal(&mut rng);
            let a_s = policy.control(t, xs);
            pay_s += running_reward_with_drift(t, xs, *d, &model.cost) * dt;
            xs += a_s * dt + sigma * dw;

            let a_w = policy.control(t, xw);
            pay_w += running_reward_with_drift(t, xw, *d, &model.cost) * dt;
            let theta = a_w / sigma;
            log_l += theta * dw - 0.5 * theta * theta * dt;
            xw += sigma * dw;
        }
        pay_s += terminal_reward(xs, &model.cost);
        pay_w += terminal_reward(xw, &model.cost);
        let l = math::exp(log_l);
        (pay_s, l * pay_w, l)
    });

    let strong: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let weighted: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let paired = PairedEstimate::from_pairs(&strong, &weighted)?;
    let sum_l: f64 = rows.iter().map(|r| r.2).sum();
    let sum_l2: f64 = rows.iter().map(|r| r.2 * r.2).sum();
    let ess = sum_l * sum_l / sum_l2;
    Ok(GirsanovReport {
        strong: paired.first,
        reweighted: paired.second,
        combined_se: paired.se,
        effective_sample_size: ess,
        degenerate_weights: ess < 0.05 * n_paths as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ConstantPolicy, FnPolicy};
    use crate::pool::PoolConfig;
    use crate::reward::CostModel;

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
    fn deterministic_flow_without_noise() {
        let time = TimeGrid::new(1.0, 10).unwrap();
        let noise = NoiseConfig { sigma: 0.0 };
        let cloud = propagate_state_law(&ConstantPolicy(0.0), &noise, &InitialLaw::Dirac(2.5), &time, 100, 3).unwrap();
        for j in 0..=10 {
            assert!(cloud.at(j).iter().all(|x| *x == 2.5));
        }
    }

    #[test]
    fn induced_law_of_constant_policies() {
        let time = TimeGrid::new(1.0, 10).unwrap();
        let ctrl = ControlInterval::new(-1.0, 1.0).unwrap();
        let noise = NoiseConfig::new(1.0).unwrap();
        let cloud = propagate_state_law(&ConstantPolicy(1.0), &noise, &InitialLaw::Dirac(0.0), &time, 200, 1).unwrap();
        let up = induced_control_law(&ConstantPolicy(1.0), &cloud, &ctrl).unwrap();
        assert!(up.weights().iter().all(|w| *w == [0.0, 0.0, 1.0]));
        assert!(up.means().iter().all(|q| *q == 1.0));
        let idle = induced_control_law(&ConstantPolicy(0.0), &cloud, &ctrl).unwrap();
        assert!(idle.weights().iter().all(|w| *w == [0.0, 1.0, 0.0]));
        assert!(idle.means().iter().all(|q| *q == 0.0));
    }

    #[test]
    fn induced_law_rejects_off_support_controls() {
        let time = TimeGrid::new(1.0, 2).unwrap();
        let ctrl = ControlInterval::new(-1.0, 1.0).unwrap();
        let noise = NoiseConfig::new(1.0).unwrap();
        let cloud = propagate_state_law(&ConstantPolicy(0.0), &noise, &InitialLaw::Dirac(0.0), &time, 100, 1).unwrap();
        assert!(induced_control_law(&FnPolicy(|_, _| 0.5), &cloud, &ctrl).is_err());
    }

    #[test]
    fn from_means_round_trips() {
        let time = TimeGrid::new(1.0, 4).unwrap();
        let ctrl = ControlInterval::new(-2.0, 1.0).unwrap();
        let flow = MeanFlow::new(time, alloc::vec![0.0, 0.5, -1.0, 1.0, -2.0]).unwrap();
        let law = ControlLawFlow::from_means(&ctrl, &flow).unwrap();
        assert_eq!(law.means(), flow.values());
    }

    #[test]
    fn zero_cost_converges_immediately() {
        let m = model(CostModel::zero(), 0.5);
        let time = TimeGrid::new(1.0, 20).unwrap();
        let space = SpatialGrid::new(-5.0, 5.0, 51).unwrap();
        let mut fp = FixedPointConfig::defaults(&m.ctrl);
        fp.particles = 500;
        let sol = solve_mfg(&m, &InitialLaw::Gaussian { mean: 0.0, sd: 1.0 }, &space, &time, &fp).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations(), 1);
        assert_eq!(sol.final_residual(), 0.0);
    }

    #[test]
    fn girsanov_zero_policy_is_exact() {
        let m = model(CostModel::quadratic(0.1, 1.0).unwrap(), 0.5);
        let time = TimeGrid::new(1.0, 20).unwrap();
        let r = girsanov_reward_check(&m, &MeanFlow::zero(time), &ConstantPolicy(0.0), &InitialLaw::Dirac(0.3), 200, 9)
            .unwrap();
        assert_eq!(r.difference(), 0.0);
        assert_eq!(r.combined_se, 0.0);
        assert_eq!(r.effective_sample_size, 200.0);
    }

    #[test]
    fn girsanov_drift_cap() {
        let m = model(CostModel::zero(), 0.25);
        let time = TimeGrid::new(1.0, 20).unwrap();
        let r = girsanov_reward_check(&m, &MeanFlow::zero(time), &ConstantPolicy(0.0), &InitialLaw::Dirac(0.0), 200, 9);
        assert!(matches!(r, Err(Error::DriftCap { .. })));
    }
}
