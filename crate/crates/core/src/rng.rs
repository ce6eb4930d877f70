//! Seed derivation for independent, order-free random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream namespace for the early-fusion ensemble.
pub const NS_EARLY_FUSION: u64 = 0x4546; // "EF"
/// Stream namespace for the late-fusion ensembles (combined with the feature index).
pub const NS_LATE_FUSION: u64 = 0x4c46; // "LF"
pub const NS_SPLIT: u64 = 0x5350;
pub const NS_PROJECTION: u64 = 0x4550;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream identifiers into a new seed.
///
/// Distinct paths give statistically independent streams, so work items
/// can draw their randomness in any order.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc.rotate_left(23) ^ splitmix64(p)))
}

pub fn stream(base: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, path))
}
