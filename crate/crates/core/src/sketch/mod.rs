// SPDX-License-Identifier: Apache-2.0

//! Linear, mergeable sketches over a fixed coordinate domain `[0, n)`.
//!
//! Both sketch types hold a `rows × width` matrix of `f64` counters. Row `j`
//! maps coordinate `i` to bucket `h_j(i)`; the Count Sketch also multiplies by
//! a sign `s_j(i) ∈ {-1, +1}`. Because every update is a counter-wise
//! addition, sketches with the same [`SketchConfig`] (geometry *and* seed)
//! merge by adding their counters.

mod codec;
mod count_min;
mod count_sketch;
mod hash;

pub use codec::{HEADER_LEN, MAGIC, VERSION};
pub use count_min::CountMinSketch;
pub use count_sketch::CountSketch;
pub use hash::HashSpec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of counter rows.
pub const DEFAULT_ROWS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("invalid sketch configuration: {0}")]
    Config(String),
    #[error("index {index} out of range for domain of size {domain_size}")]
    Domain { index: usize, domain_size: usize },
    #[error("vector of length {got} does not match sketch domain size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("incompatible sketches: {0}")]
    Incompatible(String),
    #[error("malformed sketch bytes at offset {offset}: {reason}")]
    Decode { offset: usize, reason: String },
}

/// Geometry and hashing seed of a sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SketchConfig {
    pub rows: usize,
    pub width: usize,
    pub seed: u64,
    pub domain_size: usize,
}

impl SketchConfig {
    pub fn new(
        rows: usize,
        width: usize,
        seed: u64,
        domain_size: usize,
    ) -> Result<Self, SketchError> {
        let cfg = Self {
            rows,
            width,
            seed,
            domain_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Width giving a compression ratio of at least `ratio` with `rows` rows:
    /// `ceil(domain_size / (rows * ratio))`.
    pub fn width_for_ratio(
        domain_size: usize,
        rows: usize,
        ratio: f64,
    ) -> Result<usize, SketchError> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(SketchError::Config(format!(
                "compression ratio must be positive and finite, got {ratio}"
            )));
        }
        if rows == 0 || domain_size == 0 {
            return Err(SketchError::Config(
                "rows and domain_size must be positive".into(),
            ));
        }
        let exact = domain_size as f64 / (rows as f64 * ratio);
        let nearest = exact.round();
        // Exact quotients must not round up through float noise.
        let width = if (exact - nearest).abs() <= 1e-9 * exact.max(1.0) {
            nearest
        } else {
            exact.ceil()
        };
        Ok((width as usize).max(1))
    }

    pub fn validate(&self) -> Result<(), SketchError> {
        if self.rows == 0 {
            return Err(SketchError::Config("rows must be at least 1".into()));
        }
        if self.width == 0 {
            return Err(SketchError::Config("width must be at least 1".into()));
        }
        if self.domain_size == 0 {
            return Err(SketchError::Config("domain_size must be at least 1".into()));
        }
        if u32::try_from(self.rows).is_err() || u32::try_from(self.width).is_err() {
            return Err(SketchError::Config(
                "rows and width must fit in 32 bits".into(),
            ));
        }
        if self.rows.checked_mul(self.width).is_none() {
            return Err(SketchError::Config("rows * width overflows".into()));
        }
        Ok(())
    }

    pub fn num_counters(&self) -> usize {
        self.rows * self.width
    }

    /// Dense coordinates per counter, `n / (d·w)`.
    pub fn compression_ratio(&self) -> f64 {
        self.domain_size as f64 / self.num_counters() as f64
    }

    /// Serialized size of a Count Sketch with this geometry.
    pub fn payload_bytes(&self) -> usize {
        HEADER_LEN + self.num_counters() * 8
    }
}

/// Median of a small slice; the mean of the two middle values for even length.
/// Reorders `values`.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}
