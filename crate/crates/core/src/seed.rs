//! Counter-based seed derivation.
//!
//! Every stochastic routine receives one `u64` seed and derives the seed of each
//! sub-task (trial, draw, pair) from it with a SplitMix64 chain, so results never
//! depend on scheduling or on how many workers are running.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of counters.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed.wrapping_add(GOLDEN)), |acc, &c| {
        mix(acc ^ mix(c.wrapping_add(GOLDEN).wrapping_mul(GOLDEN)))
    })
}

/// Generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags keep derived seeds of different consumers apart.
pub(crate) const TAG_TRIAL: u64 = 1;
pub(crate) const TAG_REDRAW: u64 = 2;
pub(crate) const TAG_PAIR: u64 = 3;
pub(crate) const TAG_ERROR: u64 = 4;
pub(crate) const TAG_DRAW: u64 = 5;
