// SPDX-License-Identifier: Apache-2.0

use crate::rng::mix64;

const BUCKET_TAG: u64 = 0xB0C4_E7A1_5D2F_9A13;
const SIGN_TAG: u64 = 0x51C7_3E09_A4F1_6B2D;

/// Per-row bucket and sign functions derived from a single 64-bit seed.
///
/// Bucket and sign seeds of a row are derived with distinct tags, so the two
/// functions are independent of each other and of the other rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashSpec {
    width: u64,
    bucket_seeds: Vec<u64>,
    sign_seeds: Vec<u64>,
}

impl HashSpec {
    pub fn new(seed: u64, rows: usize, width: usize) -> Self {
        let row_seed = |tag: u64, j: usize| mix64(seed ^ mix64(tag.wrapping_add(j as u64)));
        Self {
            width: width as u64,
            bucket_seeds: (0..rows).map(|j| row_seed(BUCKET_TAG, j)).collect(),
            sign_seeds: (0..rows).map(|j| row_seed(SIGN_TAG, j)).collect(),
        }
    }

    #[inline]
    fn hash(row_seed: u64, index: usize) -> u64 {
        mix64(row_seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// `h_j(i) ∈ [0, width)`: high 32 bits of the row hash, reduced mod width.
    #[inline]
    pub fn bucket(&self, row: usize, index: usize) -> usize {
        ((Self::hash(self.bucket_seeds[row], index) >> 32) % self.width) as usize
    }

    /// `s_j(i) ∈ {-1, +1}`: parity of an independent row hash.
    #[inline]
    pub fn sign(&self, row: usize, index: usize) -> f64 {
        if Self::hash(self.sign_seeds[row], index)
            .count_ones()
            .is_multiple_of(2)
        {
            1.0
        } else {
            -1.0
        }
    }

    pub fn rows(&self) -> usize {
        self.bucket_seeds.len()
    }
}
