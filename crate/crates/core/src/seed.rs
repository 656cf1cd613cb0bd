//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value obtained by folding integer coordinates into a base seed with the
//! SplitMix64 finaliser. The result only depends on the coordinates, never on
//! scheduling, which is what makes online augmentation and parallel sweeps
//! reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `base`, one SplitMix64 round per part.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

/// Stream tags keep independent uses of one base seed apart.
pub mod stream {
    pub const INIT: u64 = 0x1;
    pub const BATCH: u64 = 0x2;
    pub const ONLINE_AUG: u64 = 0x3;
    pub const OFFLINE_AUG: u64 = 0x4;
    pub const OFFLINE_BATCH: u64 = 0x5;
    pub const SUBSAMPLE: u64 = 0x6;
    pub const TRIAL: u64 = 0x7;
    pub const SWEEP_CELL: u64 = 0x8;
}
