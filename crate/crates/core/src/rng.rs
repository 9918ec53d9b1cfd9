//! Counter-based random substreams.
//!
//! Every simulated path (or particle, or player within a repetition) draws from
//! its own ChaCha stream keyed by `(seed, domain, index)`. Streams never depend
//! on evaluation order, so results are identical for any thread count, and two
//! runs that share a key see identical noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

/// Noise domains. Distinct domains never share a stream.
pub mod domain {
    pub const POLICY_PATHS: u64 = 1;
    pub const PARTICLES: u64 = 2;
    pub const GAME_PLAYER: u64 = 3;
    pub const GAME_COMMON: u64 = 4;
    pub const GIRSANOV: u64 = 5;
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. one seed per player count in a sweep.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn substream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(index);
    rng
}

#[inline]
pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}
