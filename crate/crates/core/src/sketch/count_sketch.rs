// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;

use super::{median_in_place, HashSpec, SketchConfig, SketchError};
use crate::model::ParamVector;

/// Count Sketch over real-valued coordinates.
///
/// `insert(i, v)` adds `s_j(i)·v` to `counters[j][h_j(i)]` in every row; a
/// point query returns the median over rows of `s_j(i)·counters[j][h_j(i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    config: SketchConfig,
    hashes: HashSpec,
    counters: Vec<f64>,
}

impl CountSketch {
    pub fn new(config: SketchConfig) -> Result<Self, SketchError> {
        config.validate()?;
        Ok(Self {
            hashes: HashSpec::new(config.seed, config.rows, config.width),
            counters: vec![0.0; config.num_counters()],
            config,
        })
    }

    /// Rebuilds a sketch from raw row-major counters.
    pub fn from_counters(config: SketchConfig, counters: Vec<f64>) -> Result<Self, SketchError> {
        let mut sk = Self::new(config)?;
        if counters.len() != sk.counters.len() {
            return Err(SketchError::Input(format!(
                "expected {} counters, got {}",
                sk.counters.len(),
                counters.len()
            )));
        }
        if counters.iter().any(|c| !c.is_finite()) {
            return Err(SketchError::Input("counters must be finite".into()));
        }
        sk.counters = counters;
        Ok(sk)
    }

    /// Sketches a whole vector into a fresh sketch.
    pub fn from_vector(config: SketchConfig, v: &[f64]) -> Result<Self, SketchError> {
        let mut sk = Self::new(config)?;
        sk.insert_vector(v)?;
        Ok(sk)
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn hashes(&self) -> &HashSpec {
        &self.hashes
    }

    /// Row-major `rows × width` counters.
    pub fn counters(&self) -> &[f64] {
        &self.counters
    }

    pub(crate) fn counters_mut(&mut self) -> &mut [f64] {
        &mut self.counters
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.config.width;
        &self.counters[j * w..(j + 1) * w]
    }

    fn check_index(&self, index: usize) -> Result<(), SketchError> {
        if index >= self.config.domain_size {
            return Err(SketchError::Domain {
                index,
                domain_size: self.config.domain_size,
            });
        }
        Ok(())
    }

    #[inline]
    fn add_unchecked(&mut self, index: usize, value: f64) {
        let w = self.config.width;
        for j in 0..self.config.rows {
            let b = self.hashes.bucket(j, index);
            self.counters[j * w + b] += self.hashes.sign(j, index) * value;
        }
    }

    pub fn insert(&mut self, index: usize, value: f64) -> Result<(), SketchError> {
        self.check_index(index)?;
        if !value.is_finite() {
            return Err(SketchError::Input(format!("value {value} is not finite")));
        }
        self.add_unchecked(index, value);
        Ok(())
    }

    /// Inserts every nonzero coordinate of `v`. Validates the whole vector
    /// before touching any counter.
    pub fn insert_vector(&mut self, v: &[f64]) -> Result<(), SketchError> {
        if v.len() != self.config.domain_size {
            return Err(SketchError::LengthMismatch {
                expected: self.config.domain_size,
                got: v.len(),
            });
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(SketchError::Input(format!("coordinate {i} is not finite")));
        }
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                self.add_unchecked(i, x);
            }
        }
        Ok(())
    }

    fn estimate(&self, index: usize, buf: &mut Vec<f64>) -> f64 {
        let w = self.config.width;
        buf.clear();
        buf.extend((0..self.config.rows).map(|j| {
            self.hashes.sign(j, index) * self.counters[j * w + self.hashes.bucket(j, index)]
        }));
        median_in_place(buf)
    }

    pub fn query(&self, index: usize) -> Result<f64, SketchError> {
        self.check_index(index)?;
        Ok(self.estimate(index, &mut Vec::with_capacity(self.config.rows)))
    }

    /// Point estimates for every coordinate of the domain.
    pub fn query_vector(&self) -> ParamVector {
        let mut buf = Vec::with_capacity(self.config.rows);
        (0..self.config.domain_size)
            .map(|i| self.estimate(i, &mut buf))
            .collect()
    }

    /// Keeps the `ceil(fraction·n)` estimates of largest magnitude and zeros the
    /// rest. Ties go to the lower index.
    pub fn top_fraction(&self, fraction: f64) -> Result<ParamVector, SketchError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(SketchError::Input(format!(
                "fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let mut est = self.query_vector();
        let n = est.len();
        let keep = keep_count(fraction, n);
        if keep >= n {
            return Ok(est);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| match est[b].abs().total_cmp(&est[a].abs()) {
            Ordering::Equal => a.cmp(&b),
            o => o,
        });
        for &i in &order[keep..] {
            est[i] = 0.0;
        }
        Ok(est)
    }

    fn check_compatible(&self, other: &Self) -> Result<(), SketchError> {
        if self.config != other.config {
            return Err(SketchError::Incompatible(format!(
                "{:?} vs {:?}",
                self.config, other.config
            )));
        }
        Ok(())
    }

    /// Counter-wise sum into `self`.
    pub fn merge_from(&mut self, other: &Self) -> Result<(), SketchError> {
        self.check_compatible(other)?;
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            *a += b;
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self, SketchError> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn scale_in_place(&mut self, c: f64) -> Result<(), SketchError> {
        if !c.is_finite() {
            return Err(SketchError::Input(format!(
                "scale factor {c} is not finite"
            )));
        }
        self.counters.iter_mut().for_each(|x| *x *= c);
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Result<Self, SketchError> {
        let mut out = self.clone();
        out.scale_in_place(c)?;
        Ok(out)
    }

    /// Length of [`CountSketch::to_bytes`] output.
    pub fn payload_bytes(&self) -> usize {
        self.config.payload_bytes()
    }

    pub fn is_zero(&self) -> bool {
        self.counters.iter().all(|&c| c == 0.0)
    }
}

pub(crate) fn keep_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let nearest = exact.round();
    let k = if (exact - nearest).abs() <= 1e-9 * exact.max(1.0) {
        nearest
    } else {
        exact.ceil()
    };
    (k as usize).clamp(1, n)
}
