//! Finite-N game against the pool and the approximate-Nash gap of the
//! mean-field feedback.
//!
//! Each repetition samples `N` initial inventories, lets every player trade by
//! its feedback, moves the pool reserve by the players' average rate and marks
//! inventories to the pool price `k/X² + σ₀·W⁰`. A player's payoff is its
//! terminal wealth `Y + X·P` less holding and terminal costs.
//!
//! The gap `ε̂_N` is measured by letting one player deviate to a best
//! response. The deviator's own trades move the pool by `1/N` of their size,
//! so their optimal control depends on their cumulative trade `c` as well as
//! their inventory: the best response solves an HJB on `(t, x, c)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::hjb::{cfl_number, stencil, SpatialGrid, TOL_Z};
use crate::law::InitialLaw;
use crate::math;
use crate::measure::DiscreteMeasure;
use crate::policy::FeedbackPolicy;
use crate::pool::{spot_price, MeanFlow, TimeGrid};
use crate::reward::{terminal_reward, Model};
use crate::rng::{derive_seed, domain, standard_normal, substream};
use crate::stats::{MeanEstimate, PairedEstimate, Z95};

/// Empirical measure `(1/n)·Σ δ_{a_j}` of a list of controls.
pub fn empirical_measure(samples: &[f64]) -> Result<DiscreteMeasure> {
    DiscreteMeasure::empirical(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConfig {
    pub n: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Initial stable-token holding of every player.
    pub y0: f64,
    pub model: Model,
    pub law0: InitialLaw,
    pub time: TimeGrid,
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("game.n must be at least 1"));
        }
        if self.n >= 1 << 24 {
            return Err(Error::invalid("game.n is too large"));
        }
        if self.n_paths < 100 {
            return Err(Error::invalid("game.n_paths must be at least 100"));
        }
        if !self.y0.is_finite() {
            return Err(Error::invalid("game.y0 must be finite"));
        }
        self.law0.validate()?;
        self.model.require_admissible(&self.time)
    }

    fn with_players(&self, n: usize, seed: u64) -> Self {
        GameConfig { n, seed, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameResult {
    /// `Ĵ_{n,i}` per player.
    pub players: Vec<MeanEstimate>,
    /// Per-path average over players.
    pub pooled: MeanEstimate,
    pub terminal_reserve_mean: f64,
    /// Smallest pool reserve seen on any path and step.
    pub min_reserve: f64,
    pub terminal_price_mean: f64,
    /// `P_T − P_0` across paths.
    pub price_change: MeanEstimate,
    /// Largest `|V − (Y + X·P)| / (1 + |Y| + |X·P|)` over all paths, steps
    /// and players, where `V` is tracked incrementally.
    pub max_accounting_error: f64,
    /// Whether the reserve stayed at `X₀` exactly on every step and path.
    pub reserve_constant: bool,
}

/// Deviator's best-response feedback on `(t, x, c)`.
#[derive(Debug, Clone)]
pub struct AugmentedSurface {
    time: TimeGrid,
    space: SpatialGrid,
    /// `None` when the control set is `{0}`.
    trade: Option<SpatialGrid>,
    policy: Vec<f64>,
    values: Vec<f64>,
}

impl AugmentedSurface {
    fn index(&self, j: usize, i: usize, m: usize) -> usize {
        let n_c = self.trade.map_or(1, |g| g.n_x);
        (j * self.space.n_x + i) * n_c + m
    }

    /// Feedback `β(t, x, c)`: time floored to its node, `x` and `c` snapped
    /// to the nearest node.
    pub fn control(&self, t: f64, x: f64, c: f64) -> f64 {
        let j = self.time.floor_index(t);
        let (i, _) = self.space.nearest(x);
        let m = self.trade.map_or(0, |g| g.nearest(c).0);
        self.policy[self.index(j, i, m)]
    }

    /// `U(t_j, x_i, c_m)`.
    pub fn value(&self, j: usize, i: usize, m: usize) -> f64 {
        self.values[self.index(j, i, m)]
    }

    pub fn trade_grid(&self) -> Option<&SpatialGrid> {
        self.trade.as_ref()
    }
}

enum Strategy<'a> {
    Markov(&'a dyn FeedbackPolicy),
    Augmented(&'a AugmentedSurface),
}

impl Strategy<'_> {
    #[inline]
    fn control(&self, t: f64, x: f64, c: f64) -> f64 {
        match self {
            Strategy::Markov(p) => p.control(t, x),
            Strategy::Augmented(s) => s.control(t, x, c),
        }
    }
}

struct PathRecord {
    payoffs: Vec<f64>,
    others_mean: Vec<f64>,
    terminal_reserve: f64,
    min_reserve: f64,
    price_start: f64,
    price_end: f64,
    accounting_error: f64,
    reserve_constant: bool,
}

fn player_stream(rep: usize, player: usize) -> u64 {
    ((rep as u64) << 24) | player as u64
}

/// Runs every repetition. `watch` names a player whose opponents' average
/// control is recorded per step.
fn run_game(gc: &GameConfig, strategies: &[Strategy<'_>], watch: Option<usize>) -> Result<Vec<PathRecord>> {
    let n = gc.n;
    let time = gc.time;
    let dt = time.dt();
    let sqrt_dt = math::sqrt(dt);
    let pool = gc.model.pool;
    let cost = gc.model.cost;
    let sigma = gc.model.noise.sigma;

    let records: Vec<Result<PathRecord>> = map_indexed(gc.n_paths, |rep| {
        let mut rngs: Vec<_> = (0..n).map(|i| substream(gc.seed, domain::GAME_PLAYER, player_stream(rep, i))).collect();
        let mut common = substream(gc.seed, domain::GAME_COMMON, rep as u64);

        let mut x: Vec<f64> = rngs.iter_mut().map(|r| gc.law0.sample(r)).collect();
        let mut y = alloc::vec![gc.y0; n];
        let mut c = alloc::vec![0.0; n];
        let mut holding = alloc::vec![0.0; n];
        let mut a = alloc::vec![0.0; n];
        let mut reserve = pool.x0;
        let mut w0 = 0.0;
        let mut price = spot_price(&pool, reserve)?;
        let price_start = price;
        let mut wealth: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| yi + xi * price).collect();
        let mut min_reserve = reserve;
        let mut accounting_error: f64 = 0.0;
        let mut reserve_constant = true;
        let mut others_mean = Vec::with_capacity(if watch.is_some() { time.steps } else { 0 });

        for j in 0..time.steps {
            let t = time.t(j);
            let mut total = 0.0;
            for i in 0..n {
                a[i] = strategies[i].control(t, x[i], c[i]);
                total += a[i];
            }
            if let Some(d) = watch {
                others_mean.push(if n > 1 { (total - a[d]) / (n - 1) as f64 } else { 0.0 });
            }
            let next_reserve = reserve - total / n as f64 * dt;
            if next_reserve < pool.eps0 {
                return Err(Error::FloorViolation { t: time.t(j + 1), reserve: next_reserve, floor: pool.eps0 });
            }
            reserve_constant &= next_reserve == pool.x0;
            min_reserve = min_reserve.min(next_reserve);
            w0 += sqrt_dt * standard_normal(&mut common);
            let next_price = spot_price(&pool, next_reserve)? + pool.sigma0 * w0;
            let dp = next_price - price;

            for i in 0..n {
                holding[i] += cost.holding(t, x[i]) * dt;
                let dy = -a[i] * price * dt;
                let dx = a[i] * dt + sigma * sqrt_dt * standard_normal(&mut rngs[i]);
                // product rule on Y + X·P, exact for discrete increments
                wealth[i] += dy + x[i] * dp + price * dx + dx * dp;
                y[i] += dy;
                x[i] += dx;
                c[i] += a[i] * dt;
                let marked = y[i] + x[i] * next_price;
                let scale = 1.0 + math::abs(y[i]) + math::abs(x[i] * next_price);
                accounting_error = accounting_error.max(math::abs(wealth[i] - marked) / scale);
            }
            reserve = next_reserve;
            price = next_price;
        }

        let payoffs = (0..n).map(|i| wealth[i] - holding[i] + terminal_reward(x[i], &cost)).collect();
        Ok(PathRecord {
            payoffs,
            others_mean,
            terminal_reserve: reserve,
            min_reserve,
            price_start,
            price_end: price,
            accounting_error,
            reserve_constant,
        })
    });
    records.into_iter().collect()
}

fn summarize(gc: &GameConfig, records: &[PathRecord]) -> Result<GameResult> {
    let paths = records.len() as f64;
    let players = (0..gc.n)
        .map(|i| MeanEstimate::from_samples(&records.iter().map(|r| r.payoffs[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let pooled: Vec<f64> = records.iter().map(|r| r.payoffs.iter().sum::<f64>() / gc.n as f64).collect();
    let changes: Vec<f64> = records.iter().map(|r| r.price_end - r.price_start).collect();
    Ok(GameResult {
        players,
        pooled: MeanEstimate::from_samples(&pooled)?,
        terminal_reserve_mean: records.iter().map(|r| r.terminal_reserve).sum::<f64>() / paths,
        min_reserve: records.iter().map(|r| r.min_reserve).fold(f64::INFINITY, f64::min),
        terminal_price_mean: records.iter().map(|r| r.price_end).sum::<f64>() / paths,
        price_change: MeanEstimate::from_samples(&changes)?,
        max_accounting_error: records.iter().map(|r| r.accounting_error).fold(0.0, f64::max),
        reserve_constant: records.iter().all(|r| r.reserve_constant),
    })
}

/// Simulates the `N`-player game with one feedback per player.
pub fn simulate_game(gc: &GameConfig, policies: &[&dyn FeedbackPolicy]) -> Result<GameResult> {
    gc.validate()?;
    if policies.len() != gc.n {
        return Err(Error::invalid("need exactly one policy per player"));
    }
    let strategies: Vec<Strategy<'_>> = policies.iter().map(|p| Strategy::Markov(*p)).collect();
    let records = run_game(gc, &strategies, None)?;
    summarize(gc, &records)
}

/// Default number of nodes on the cumulative-trade axis.
pub const TRADE_NODES: usize = 51;

/// Best response of one player on `(t, x, c)` when the other `n − 1` trade
/// at the frozen mean rate `others`.
///
/// The reserve seen by the deviator is `X₀ − ((n−1)/n)·∫q̄⁻ − c/n`; their own
/// rate `a` adds `a/n` to the pool flow, so the Hamiltonian
/// `a·(U_x + U_c + x·2k/(n·R³))` stays linear in `a` and the maximizer is
/// bang-bang.
pub fn solve_augmented_hjb(
    model: &Model,
    others: &MeanFlow,
    n: usize,
    space: &SpatialGrid,
    trade_nodes: usize,
) -> Result<AugmentedSurface> {
    let time = *others.grid();
    model.require_admissible(&time)?;
    others.check_within(&model.ctrl)?;
    let ctrl = model.ctrl;
    let trade = if ctrl.width() > 0.0 {
        Some(SpatialGrid::new(ctrl.a_min * time.horizon, ctrl.a_max * time.horizon, trade_nodes)?)
    } else {
        None
    };
    let dt = time.dt();
    let dx = space.dx();
    let sigma = model.noise.sigma;
    let mut cfl = cfl_number(dt, dx, sigma, ctrl.max_abs());
    if let Some(g) = trade {
        cfl += dt * ctrl.max_abs() / g.dx();
    }
    if cfl > 1.0 {
        return Err(Error::Cfl { number: cfl });
    }

    let n_x = space.n_x;
    let n_c = trade.map_or(1, |g| g.n_x);
    let xs: Vec<f64> = space.nodes().collect();
    let cs: Vec<f64> = trade.map_or(alloc::vec![0.0], |g| g.nodes().collect());
    let nf = n as f64;
    let others_share = (nf - 1.0) / nf;
    let cum = others.cumulative();
    let k2 = 2.0 * model.pool.k;

    // per (j, m): drift from the others and the own-impact coefficient
    let mut others_drift = alloc::vec![0.0; time.len() * n_c];
    let mut own_coef = alloc::vec![0.0; time.len() * n_c];
    for j in 0..time.len() {
        for m in 0..n_c {
            let reserve = model.pool.x0 - others_share * cum[j] - cs[m] / nf;
            if reserve < model.pool.eps0 {
                return Err(Error::FloorViolation { t: time.t(j), reserve, floor: model.pool.eps0 });
            }
            let r3 = reserve * reserve * reserve;
            others_drift[j * n_c + m] = k2 * others_share * others.values()[j] / r3;
            own_coef[j * n_c + m] = k2 / (nf * r3);
        }
    }

    let plane = n_x * n_c;
    let mut values = alloc::vec![0.0; time.len() * plane];
    for i in 0..n_x {
        let v = terminal_reward(xs[i], &model.cost);
        for m in 0..n_c {
            values[time.steps * plane + i * n_c + m] = v;
        }
    }

    let half_var = 0.5 * sigma * sigma;
    let trade_dx = trade.map_or(1.0, |g| g.dx());
    let mut column = alloc::vec![0.0; n_x];
    for j in (0..time.steps).rev() {
        let t = time.t(j);
        let (head, tail) = values.split_at_mut((j + 1) * plane);
        let next = &tail[..plane];
        let row = &mut head[j * plane..];
        for m in 0..n_c {
            for i in 0..n_x {
                column[i] = next[i * n_c + m];
            }
            for i in 0..n_x {
                let (bx, fx, sxx) = stencil(&column, i, dx);
                let (bc, fc) = trade_slopes(&next[i * n_c..(i + 1) * n_c], m, trade_dx);
                let own = xs[i] * own_coef[j * n_c + m];
                let ham = (ctrl.a_min * (bx + bc + own)).max(0.0).max(ctrl.a_max * (fx + fc + own));
                let f = xs[i] * others_drift[j * n_c + m] - model.cost.holding(t, xs[i]);
                let u = column[i] + dt * (ham + half_var * sxx + f);
                if !u.is_finite() {
                    return Err(Error::NonFinite { t, x: xs[i] });
                }
                row[i * n_c + m] = u;
            }
        }
    }

    let mut policy = alloc::vec![0.0; values.len()];
    for j in 0..time.len() {
        let layer = &values[j * plane..(j + 1) * plane];
        for m in 0..n_c {
            for i in 0..n_x {
                column[i] = layer[i * n_c + m];
            }
            for i in 0..n_x {
                let (bx, fx, _) = stencil(&column, i, dx);
                let (bc, fc) = trade_slopes(&layer[i * n_c..(i + 1) * n_c], m, trade_dx);
                let own = xs[i] * own_coef[j * n_c + m];
                let up = ctrl.a_max * (fx + fc + own);
                let down = ctrl.a_min * (bx + bc + own);
                policy[j * plane + i * n_c + m] = if up.max(down) <= TOL_Z {
                    0.0
                } else if up >= down {
                    ctrl.a_max
                } else {
                    ctrl.a_min
                };
            }
        }
    }

    Ok(AugmentedSurface { time, space: *space, trade, policy, values })
}

/// One-sided slopes along the trade axis, continued linearly at the ends.
#[inline]
fn trade_slopes(v: &[f64], m: usize, dc: f64) -> (f64, f64) {
    let n = v.len();
    if n == 1 {
        return (0.0, 0.0);
    }
    if m == 0 {
        let d = (v[1] - v[0]) / dc;
        (d, d)
    } else if m == n - 1 {
        let d = (v[n - 1] - v[n - 2]) / dc;
        (d, d)
    } else {
        ((v[m] - v[m - 1]) / dc, (v[m + 1] - v[m]) / dc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseReport {
    pub n: usize,
    pub deviator: usize,
    /// Deviator's payoff under the best response.
    pub best_response: MeanEstimate,
    /// Deviator's payoff when everyone plays the equilibrium feedback.
    pub equilibrium: MeanEstimate,
    pub eps_hat: f64,
    /// Standard error of the paired difference.
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub paths: usize,
    /// Opponents' mean trading rate the best response was solved against.
    pub others_flow: MeanFlow,
}

/// Estimates `ε̂ = Ĵ(β) − Ĵ(α̂)` for one deviator with a paired 95% interval.
///
/// Both runs consume identical noise per repetition; the opponents' paths
/// coincide because their feedback ignores the pool state.
pub fn best_response_value(
    gc: &GameConfig,
    equilibrium: &dyn FeedbackPolicy,
    deviator: usize,
    space: &SpatialGrid,
    trade_nodes: usize,
) -> Result<BestResponseReport> {
    gc.validate()?;
    if deviator >= gc.n {
        return Err(Error::invalid("deviator index out of range"));
    }
    let honest: Vec<Strategy<'_>> = (0..gc.n).map(|_| Strategy::Markov(equilibrium)).collect();
    let base = run_game(gc, &honest, Some(deviator))?;

    let steps = gc.time.steps;
    let mut others = alloc::vec![0.0; gc.time.len()];
    for r in &base {
        for (acc, q) in others.iter_mut().zip(&r.others_mean) {
            *acc += q;
        }
    }
    for q in others.iter_mut().take(steps) {
        *q /= base.len() as f64;
    }
    // the last node carries no trading; continue the final rate
    others[steps] = if steps > 0 { others[steps - 1] } else { 0.0 };
    for q in &mut others {
        *q = q.clamp(gc.model.ctrl.a_min, gc.model.ctrl.a_max);
    }
    let others_flow = MeanFlow::new(gc.time, others)?;

    let response = solve_augmented_hjb(&gc.model, &others_flow, gc.n, space, trade_nodes)?;
    let deviating: Vec<Strategy<'_>> = (0..gc.n)
        .map(|i| if i == deviator { Strategy::Augmented(&response) } else { Strategy::Markov(equilibrium) })
        .collect();
    let dev = run_game(gc, &deviating, None)?;

    let eq_pay: Vec<f64> = base.iter().map(|r| r.payoffs[deviator]).collect();
    let dev_pay: Vec<f64> = dev.iter().map(|r| r.payoffs[deviator]).collect();
    let paired = PairedEstimate::from_pairs(&dev_pay, &eq_pay)?;
    let (ci_lo, ci_hi) = paired.interval(Z95);
    Ok(BestResponseReport {
        n: gc.n,
        deviator,
        best_response: paired.first,
        equilibrium: paired.second,
        eps_hat: paired.diff,
        se: paired.se,
        ci_lo,
        ci_hi,
        paths: gc.n_paths,
        others_flow,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashGapRow {
    pub n: usize,
    pub eps_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub se: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NashGapReport {
    pub rows: Vec<NashGapRow>,
}

impl NashGapReport {
    pub fn row(&self, n: usize) -> Option<&NashGapRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// `ε̂_N` for each player count, with an independent seed per count.
pub fn nash_gap_sweep(
    template: &GameConfig,
    equilibrium: &dyn FeedbackPolicy,
    space: &SpatialGrid,
    trade_nodes: usize,
    n_list: &[usize],
) -> Result<NashGapReport> {
    if n_list.is_empty() {
        return Err(Error::invalid("sweep.n_list must not be empty"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sweep.n_list must be strictly ascending"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let gc = template.with_players(n, derive_seed(template.seed, n as u64));
        let r = best_response_value(&gc, equilibrium, 0, space, trade_nodes)?;
        rows.push(NashGapRow { n, eps_hat: r.eps_hat, ci_lo: r.ci_lo, ci_hi: r.ci_hi, se: r.se, paths: r.paths });
    }
    Ok(NashGapReport { rows })
}
