// SPDX-License-Identifier: Apache-2.0

use super::{HashSpec, SketchConfig, SketchError};
use crate::model::ParamVector;

/// Count-Min sketch: unsigned buckets, row-minimum estimate.
///
/// On streams of non-negative updates every estimate is an upper bound on the
/// true value. Kept for comparison with [`super::CountSketch`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountMinSketch {
    config: SketchConfig,
    hashes: HashSpec,
    counters: Vec<f64>,
}

impl CountMinSketch {
    pub fn new(config: SketchConfig) -> Result<Self, SketchError> {
        config.validate()?;
        Ok(Self {
            hashes: HashSpec::new(config.seed, config.rows, config.width),
            counters: vec![0.0; config.num_counters()],
            config,
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn counters(&self) -> &[f64] {
        &self.counters
    }

    pub fn insert(&mut self, index: usize, value: f64) -> Result<(), SketchError> {
        if index >= self.config.domain_size {
            return Err(SketchError::Domain {
                index,
                domain_size: self.config.domain_size,
            });
        }
        if !value.is_finite() {
            return Err(SketchError::Input(format!("value {value} is not finite")));
        }
        let w = self.config.width;
        for j in 0..self.config.rows {
            self.counters[j * w + self.hashes.bucket(j, index)] += value;
        }
        Ok(())
    }

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
                self.insert(i, x)?;
            }
        }
        Ok(())
    }

    pub fn query(&self, index: usize) -> Result<f64, SketchError> {
        if index >= self.config.domain_size {
            return Err(SketchError::Domain {
                index,
                domain_size: self.config.domain_size,
            });
        }
        let w = self.config.width;
        Ok((0..self.config.rows)
            .map(|j| self.counters[j * w + self.hashes.bucket(j, index)])
            .fold(f64::INFINITY, f64::min))
    }

    pub fn query_vector(&self) -> ParamVector {
        (0..self.config.domain_size)
            .map(|i| self.query(i).expect("index within domain"))
            .collect()
    }

    pub fn merge(&self, other: &Self) -> Result<Self, SketchError> {
        if self.config != other.config {
            return Err(SketchError::Incompatible(format!(
                "{:?} vs {:?}",
                self.config, other.config
            )));
        }
        let mut out = self.clone();
        for (a, b) in out.counters.iter_mut().zip(&other.counters) {
            *a += b;
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Result<Self, SketchError> {
        if !c.is_finite() {
            return Err(SketchError::Input(format!(
                "scale factor {c} is not finite"
            )));
        }
        let mut out = self.clone();
        out.counters.iter_mut().for_each(|x| *x *= c);
        Ok(out)
    }
}
