#![allow(dead_code)]

use ammfg_core::{
    ControlInterval, CostModel, GameConfig, InitialLaw, Model, NoiseConfig, PoolConfig, SpatialGrid, TimeGrid,
};

pub fn reference_pool(sigma0: f64) -> PoolConfig {
    PoolConfig::new(100.0, 10.0, 1.0, sigma0).unwrap()
}

pub fn unit_ctrl() -> ControlInterval {
    ControlInterval::new(-1.0, 1.0).unwrap()
}

pub fn model(cost: CostModel, sigma: f64) -> Model {
    Model::new(reference_pool(0.0), unit_ctrl(), cost, NoiseConfig::new(sigma).unwrap()).unwrap()
}

/// Terminal reward `x`, no holding cost.
pub fn linear_terminal(sigma: f64) -> Model {
    model(CostModel::linear_terminal(1.0).unwrap(), sigma)
}

/// Terminal penalty `x²`, no holding cost, `σ = 0.2`.
pub fn quadratic_terminal() -> Model {
    model(CostModel::quadratic(0.0, 1.0).unwrap(), 0.2)
}

/// Holding `0.1·x²`, terminal `x²`, `σ = 0.5`.
pub fn symmetric() -> Model {
    model(CostModel::quadratic(0.1, 1.0).unwrap(), 0.5)
}

pub fn symmetric_law() -> InitialLaw {
    InitialLaw::Gaussian { mean: 0.0, sd: 1.0 }
}

pub fn symmetric_time() -> TimeGrid {
    TimeGrid::new(1.0, 400).unwrap()
}

pub fn symmetric_space() -> SpatialGrid {
    SpatialGrid::covering(&symmetric_law(), &unit_ctrl(), 0.5, 1.0, 401).unwrap()
}

pub fn symmetric_game(n: usize, n_paths: usize, seed: u64) -> GameConfig {
    let mut m = symmetric();
    m.pool = reference_pool(0.1);
    GameConfig { n, n_paths, seed, y0: 0.0, model: m, law0: symmetric_law(), time: symmetric_time() }
}
