//! Run configuration: a sectioned `key = value` file (TOML syntax).
//!
//! Every section rejects keys it does not know. Omitted optional keys are
//! filled with their defaults, and [`RunConfig::echo`] renders the resolved
//! file, which parses back to the same configuration.

use std::path::Path;

use ammfg_core::pool::validate_admissibility;
use ammfg_core::reward::validate_growth_bound;
use ammfg_core::{
    ControlInterval, CostFamily, CostModel, FixedPointConfig, FixedPointMode, GameConfig, InitialLaw, Model,
    NoiseConfig, PoolConfig, SpatialGrid, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const DEFAULT_NODES: usize = 401;
const DEFAULT_DAMPING: f64 = 0.5;
const DEFAULT_MAX_ITER: usize = 50;
const DEFAULT_PARTICLES: usize = 20_000;
const DEFAULT_PLAYERS: usize = 2;
const DEFAULT_GAME_PATHS: usize = 2_000;
const DEFAULT_N_LIST: [usize; 4] = [2, 8, 32, 128];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfgSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
}

/// The file as written, before defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub pool: PoolSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub law0: LawSection,
    #[serde(default)]
    pub mfg: MfgSection,
    #[serde(default)]
    pub game: GameSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// A validated configuration with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    resolved: RawConfig,
    pub model: Model,
    pub law0: InitialLaw,
    pub time: TimeGrid,
    pub space: SpatialGrid,
    pub fixed_point: FixedPointConfig,
    pub game: GameConfig,
    pub n_list: Vec<usize>,
}

fn required<T: Copy>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing required key {key}")))
}

/// Seeds must fit the file format's signed 64-bit integers.
fn check_seed(seed: u64, key: &str) -> Result<u64, CliError> {
    if seed > i64::MAX as u64 {
        return Err(CliError::Config(format!("{key} must be at most {}", i64::MAX)));
    }
    Ok(seed)
}

fn reject(value: Option<f64>, key: &str, family: &str) -> Result<(), CliError> {
    match value {
        Some(_) => Err(CliError::Config(format!("{key} does not apply to family \"{family}\""))),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(syntax_message(text, &e)))?;
        Self::resolve(raw)
    }

    /// Resolved configuration rendered back into the file format.
    pub fn echo(&self) -> String {
        toml::to_string(&self.resolved).expect("resolved config serializes")
    }

    pub fn resolved(&self) -> &RawConfig {
        &self.resolved
    }

    /// Replaces the particle and game seeds.
    pub fn override_seed(&mut self, seed: u64) -> Result<(), CliError> {
        check_seed(seed, "--seed")?;
        self.fixed_point.seed = seed;
        self.game.seed = seed;
        self.resolved.mfg.seed = Some(seed);
        self.resolved.game.seed = Some(seed);
        Ok(())
    }

    fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let mut out = raw.clone();

        let pool = PoolConfig::new(
            required(raw.pool.k, "pool.k")?,
            required(raw.pool.x0, "pool.x0")?,
            required(raw.pool.eps0, "pool.eps0")?,
            raw.pool.sigma0.unwrap_or(0.0),
        )?;
        out.pool.sigma0 = Some(pool.sigma0);

        let ctrl = ControlInterval::new(
            required(raw.control.a_min, "control.a_min")?,
            required(raw.control.a_max, "control.a_max")?,
        )?;

        let cost = resolve_cost(&raw.cost, &mut out.cost)?;
        let noise = NoiseConfig::new(required(raw.noise.sigma, "noise.sigma")?)?;
        let time = TimeGrid::new(required(raw.time.horizon, "time.horizon")?, required(raw.time.steps, "time.steps")?)?;

        let report = validate_admissibility(&pool, &ctrl, &time);
        if !report.passed {
            return Err(ammfg_core::Error::Admissibility(report).into());
        }
        let model = Model::new(pool, ctrl, cost, noise)?;

        let law0 = resolve_law(&raw.law0, &mut out.law0)?;

        let n_x = raw.grid.n_x.unwrap_or(DEFAULT_NODES);
        let space = match (raw.grid.x_lo, raw.grid.x_hi) {
            (Some(lo), Some(hi)) => SpatialGrid::new(lo, hi, n_x)?,
            (None, None) => SpatialGrid::covering(&law0, &ctrl, noise.sigma, time.horizon, n_x)?,
            (None, Some(_)) => return Err(CliError::Config("missing required key grid.x_lo".into())),
            (Some(_), None) => return Err(CliError::Config("missing required key grid.x_hi".into())),
        };
        out.grid = GridSection { x_lo: Some(space.x_lo), x_hi: Some(space.x_hi), n_x: Some(space.n_x) };

        let growth = validate_growth_bound(&cost, space.x_lo, space.x_hi, 1001)?;
        if !growth.passed {
            return Err(ammfg_core::Error::GrowthBound(growth).into());
        }

        let mut fixed_point = FixedPointConfig::defaults(&ctrl);
        fixed_point.damping = raw.mfg.damping.unwrap_or(DEFAULT_DAMPING);
        if let Some(tol) = raw.mfg.tol {
            fixed_point.tol = tol;
        }
        fixed_point.max_iter = raw.mfg.max_iter.unwrap_or(DEFAULT_MAX_ITER);
        fixed_point.particles = raw.mfg.particles.unwrap_or(DEFAULT_PARTICLES);
        fixed_point.mode = match raw.mfg.mode.as_deref().unwrap_or("picard_damped") {
            "picard_damped" => FixedPointMode::PicardDamped,
            "fictitious_play" => FixedPointMode::FictitiousPlay,
            other => {
                return Err(CliError::Config(format!(
                    "mfg.mode must be \"picard_damped\" or \"fictitious_play\", got \"{other}\""
                )))
            }
        };
        fixed_point.seed = check_seed(raw.mfg.seed.unwrap_or(0), "mfg.seed")?;
        fixed_point.validate()?;
        out.mfg = MfgSection {
            damping: Some(fixed_point.damping),
            tol: Some(fixed_point.tol),
            max_iter: Some(fixed_point.max_iter),
            particles: Some(fixed_point.particles),
            mode: Some(
                match fixed_point.mode {
                    FixedPointMode::PicardDamped => "picard_damped",
                    FixedPointMode::FictitiousPlay => "fictitious_play",
                }
                .into(),
            ),
            seed: Some(fixed_point.seed),
        };

        let game = GameConfig {
            n: raw.game.n.unwrap_or(DEFAULT_PLAYERS),
            n_paths: raw.game.n_paths.unwrap_or(DEFAULT_GAME_PATHS),
            seed: check_seed(raw.game.seed.unwrap_or(0), "game.seed")?,
            y0: raw.game.y0.unwrap_or(0.0),
            model,
            law0,
            time,
        };
        game.validate()?;
        out.game =
            GameSection { n: Some(game.n), n_paths: Some(game.n_paths), seed: Some(game.seed), y0: Some(game.y0) };

        let n_list = raw.sweep.n_list.clone().unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
        if n_list.is_empty() || n_list.contains(&0) || n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("sweep.n_list must be non-empty, positive and strictly ascending".into()));
        }
        out.sweep.n_list = Some(n_list.clone());

        Ok(RunConfig { resolved: out, model, law0, time, space, fixed_point, game, n_list })
    }
}

fn resolve_cost(raw: &CostSection, out: &mut CostSection) -> Result<CostModel, CliError> {
    let family = raw.family.as_deref().ok_or_else(|| CliError::Config("missing required key cost.family".into()))?;
    let family = match family {
        "quadratic" => {
            reject(raw.c_l, "cost.c_l", family)?;
            CostFamily::Quadratic {
                phi_h: required(raw.phi_h, "cost.phi_h")?,
                phi_l: required(raw.phi_l, "cost.phi_l")?,
            }
        }
        "linear_terminal" => {
            reject(raw.phi_h, "cost.phi_h", family)?;
            reject(raw.phi_l, "cost.phi_l", family)?;
            CostFamily::LinearTerminal { c_l: required(raw.c_l, "cost.c_l")? }
        }
        "zero" => {
            reject(raw.phi_h, "cost.phi_h", family)?;
            reject(raw.phi_l, "cost.phi_l", family)?;
            reject(raw.c_l, "cost.c_l", family)?;
            CostFamily::Zero
        }
        other => {
            return Err(CliError::Config(format!(
                "cost.family must be \"quadratic\", \"linear_terminal\" or \"zero\", got \"{other}\""
            )))
        }
    };
    let cost = CostModel::new(family, raw.c1.unwrap_or(1.0))?;
    out.c1 = Some(cost.c1);
    Ok(cost)
}

fn resolve_law(raw: &LawSection, out: &mut LawSection) -> Result<InitialLaw, CliError> {
    let family = raw.family.as_deref().ok_or_else(|| CliError::Config("missing required key law0.family".into()))?;
    let law = match family {
        "dirac" => {
            for (v, k) in [(raw.mean, "law0.mean"), (raw.sd, "law0.sd"), (raw.lo, "law0.lo"), (raw.hi, "law0.hi")] {
                reject(v, k, family)?;
            }
            InitialLaw::Dirac(required(raw.c, "law0.c")?)
        }
        "gaussian" => {
            for (v, k) in [(raw.c, "law0.c"), (raw.lo, "law0.lo"), (raw.hi, "law0.hi")] {
                reject(v, k, family)?;
            }
            InitialLaw::Gaussian { mean: required(raw.mean, "law0.mean")?, sd: required(raw.sd, "law0.sd")? }
        }
        "uniform" => {
            for (v, k) in [(raw.c, "law0.c"), (raw.mean, "law0.mean"), (raw.sd, "law0.sd")] {
                reject(v, k, family)?;
            }
            InitialLaw::Uniform { lo: required(raw.lo, "law0.lo")?, hi: required(raw.hi, "law0.hi")? }
        }
        other => {
            return Err(CliError::Config(format!(
                "law0.family must be \"dirac\", \"gaussian\" or \"uniform\", got \"{other}\""
            )))
        }
    };
    law.validate()?;
    *out = raw.clone();
    Ok(law)
}

/// Parse errors reduced to one line that names the offending line number.
fn syntax_message(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message().trim();
    match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg.to_string(),
    }
}
