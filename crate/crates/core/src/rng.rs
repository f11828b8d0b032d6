// SPDX-License-Identifier: Apache-2.0

//! Seed derivation. Every stochastic step in the simulator draws from a
//! ChaCha stream whose seed is a pure function of the experiment seed and a
//! small tuple of integers (round, device, purpose).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `base`, one mixing round per part.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_from(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

/// Purpose tags so that streams derived from the same (seed, round) never collide.
pub mod tag {
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const TRAIN: u64 = 0x5452_4149;
    pub const INIT: u64 = 0x494e_4954;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const SKETCH: u64 = 0x534b_4554;
    pub const DATA: u64 = 0x4441_5441;
    pub const ATTACK: u64 = 0x4154_544b;
}
