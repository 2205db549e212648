//! Stable derivation of independent RNG streams.
//!
//! Every unit of work (a cube, a generator plane, a pipeline phase) gets its
//! own stream seeded from the run seed and the unit's coordinates, so results
//! never depend on which worker picks the unit up or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags keep phases that share coordinates apart.
pub mod tag {
    pub const PHASE1: u64 = 0x5048_4153_4531;
    pub const PHASE2: u64 = 0x5048_4153_4532;
    pub const GENERATOR: u64 = 0x4745_4e45_5241;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `seed` with an ordered list of coordinates into a new 64-bit seed.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, parts: &[u64]) -> StreamRng {
    rng(derive(seed, parts))
}
