//! Mean-field game of traders swapping against a constant-product AMM pool.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is numerics: pool mechanics, the trader's reward
//! functionals, a monotone finite-difference HJB solver, the fixed-point
//! iteration on the mean control flow and a finite-N Monte Carlo game used to
//! measure the approximate-Nash gap of the mean-field feedback.
//!
//! Module map:
//!
//! - [`pool`]: spot price `k / X²`, reserve and price trajectories, the
//!   admissibility and impact bounds.
//! - [`reward`]: running and terminal rewards, growth-bound validation, the
//!   Hamiltonian and its bang-bang maximizer.
//! - [`hjb`]: backward HJB sweep, feedback extraction, Monte Carlo policy
//!   evaluation and a Markov-chain dynamic-programming oracle.
//! - [`mfg`]: particle propagation, induced control laws, the damped fixed
//!   point, solution verification and the change-of-measure cross-check.
//! - [`game`]: the N-player simulator, the deviator's best response on an
//!   augmented state and the ε-Nash sweep.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod exec;
pub mod game;
pub mod hjb;
pub mod law;
mod math;
pub mod measure;
pub mod mfg;
pub mod policy;
pub mod pool;
pub mod reward;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use game::{
    best_response_value, empirical_measure, nash_gap_sweep, simulate_game, solve_augmented_hjb, AugmentedSurface,
    BestResponseReport, GameConfig, GameResult, NashGapReport, NashGapRow, TRADE_NODES,
};
pub use hjb::{brute_force_value, feedback_policy, policy_evaluate, solve_hjb, SpatialGrid, ValueSurface};
pub use law::InitialLaw;
pub use measure::DiscreteMeasure;
pub use mfg::{
    girsanov_reward_check, induced_control_law, propagate_state_law, solve_mfg, verify_solution, ControlLawFlow,
    FixedPointConfig, FixedPointMode, MfgSolution, ParticleCloud,
};
pub use policy::{ConstantPolicy, FeedbackPolicy, FnPolicy};
pub use pool::{ControlInterval, MeanFlow, PoolConfig, TimeGrid};
pub use reward::{CostFamily, CostModel, Model, NoiseConfig};
pub use stats::{MeanEstimate, PairedEstimate};
