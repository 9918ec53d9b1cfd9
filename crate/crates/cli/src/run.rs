use std::path::Path;
use std::time::Instant;

use ammfg_core::pool::impact_bound;
use ammfg_core::rng::derive_seed;
use ammfg_core::{
    nash_gap_sweep, simulate_game, solve_hjb, solve_mfg, verify_solution, FeedbackPolicy, MeanFlow, MfgSolution,
    TRADE_NODES,
};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{self, Manifest, Seeds, Staging};

/// Paths used by the best-response check after an equilibrium solve.
pub const VERIFY_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Validate,
    Hjb,
    Mfg,
    Game,
    NashSweep,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Validate => "validate",
            Subcommand::Hjb => "hjb",
            Subcommand::Mfg => "mfg",
            Subcommand::Game => "game",
            Subcommand::NashSweep => "nash-sweep",
        }
    }
}

fn equilibrium(cfg: &RunConfig) -> Result<MfgSolution, CliError> {
    Ok(solve_mfg(&cfg.model, &cfg.law0, &cfg.space, &cfg.time, &cfg.fixed_point)?)
}

fn require_converged(sol: &MfgSolution) -> Result<(), CliError> {
    if sol.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence { iterations: sol.iterations(), residual: sol.final_residual() })
    }
}

/// Runs one subcommand and writes its outputs plus `manifest.json` into
/// `out_dir`. `source` is the configuration file text, hashed into the
/// manifest.
///
/// A fixed point that fails to converge still publishes the `mfg` outputs,
/// then reports [`CliError::NonConvergence`].
pub fn run_experiment(cfg: &RunConfig, source: &str, cmd: Subcommand, out_dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let mut staging = Staging::new(out_dir)?;
    let mut summary = Map::new();
    let mut outcome = Ok(());

    match cmd {
        Subcommand::Validate => {
            let report = cfg.model.admissibility(&cfg.time);
            summary.insert("max_abs_control".into(), json!(report.max_abs_control));
            summary.insert("admissibility_bound".into(), json!(report.bound));
            summary.insert("impact_bound".into(), json!(impact_bound(&cfg.model.pool, &cfg.model.ctrl)));
        }
        Subcommand::Hjb => {
            let surface = solve_hjb(&cfg.model, &MeanFlow::zero(cfg.time), &cfg.space)?;
            let v0 = cfg.law0.expectation(|x| surface.value_interpolated(0, x));
            staging.write(output::VALUE_SURFACE, &output::value_surface_csv(&surface))?;
            summary.insert("mean_initial_value".into(), json!(v0));
        }
        Subcommand::Mfg => {
            let sol = equilibrium(cfg)?;
            let report =
                verify_solution(&sol, &cfg.model, &cfg.law0, VERIFY_PATHS, derive_seed(cfg.fixed_point.seed, 1))?;
            let gap = report.best_response_gap;
            staging.write(output::MFG_FLOW, &output::mfg_flow_csv(&sol.history))?;
            staging.write(output::MFG_SUMMARY, &output::mfg_summary_csv(&sol.history, gap.diff))?;
            summary.insert("converged".into(), json!(sol.converged));
            summary.insert("iterations".into(), json!(sol.iterations()));
            summary.insert("final_residual".into(), json!(sol.final_residual()));
            summary.insert("best_response_gap".into(), json!(gap.diff));
            summary.insert("best_response_gap_se".into(), json!(gap.se));
            summary.insert("control_law_w1".into(), json!(report.control_law_w1));
            summary.insert("state_law_ks".into(), json!(report.state_law_ks));
            outcome = require_converged(&sol);
        }
        Subcommand::Game => {
            let sol = equilibrium(cfg)?;
            require_converged(&sol)?;
            let policies: Vec<&dyn FeedbackPolicy> = vec![&sol.surface; cfg.game.n];
            let result = simulate_game(&cfg.game, &policies)?;
            staging.write(output::GAME_SUMMARY, &output::game_summary_csv(&result))?;
            summary.insert("pooled_j_hat".into(), json!(result.pooled.mean));
            summary.insert("pooled_se".into(), json!(result.pooled.se));
            summary.insert("terminal_reserve_mean".into(), json!(result.terminal_reserve_mean));
            summary.insert("min_reserve".into(), json!(result.min_reserve));
            summary.insert("terminal_price_mean".into(), json!(result.terminal_price_mean));
            summary.insert("max_accounting_error".into(), json!(result.max_accounting_error));
        }
        Subcommand::NashSweep => {
            let sol = equilibrium(cfg)?;
            require_converged(&sol)?;
            let report = nash_gap_sweep(&cfg.game, &sol.surface, &cfg.space, TRADE_NODES, &cfg.n_list)?;
            staging.write(output::EPSILON, &output::epsilon_csv(&report))?;
            let rows: Vec<Value> =
                report.rows.iter().map(|r| json!({ "n": r.n, "eps_hat": r.eps_hat, "se": r.se })).collect();
            summary.insert("rows".into(), Value::Array(rows));
        }
    }

    let mut outputs = staging.files().to_vec();
    outputs.push(output::MANIFEST.to_string());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cmd.name(),
        config: serde_json::to_value(cfg.resolved()).expect("config converts to JSON"),
        config_sha256: output::sha256_hex(source.as_bytes()),
        seeds: Seeds { mfg: cfg.fixed_point.seed, game: cfg.game.seed },
        wall_time_seconds: start.elapsed().as_secs_f64(),
        summary,
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    staging.write(output::MANIFEST, &text)?;
    staging.commit()?;
    outcome
}
