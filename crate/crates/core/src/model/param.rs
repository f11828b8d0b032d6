// SPDX-License-Identifier: Apache-2.0

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Dense model parameters or a model update.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: f64, other: &[f64]) -> Result<(), ModelError> {
        check_len(self.len(), other.len())?;
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        self.0.iter_mut().for_each(|x| *x *= c);
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for ParamVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::DimMismatch { expected, got });
    }
    Ok(())
}

/// Model update `new − old`.
pub fn delta(new: &[f64], old: &[f64]) -> Result<ParamVector, ModelError> {
    check_len(old.len(), new.len())?;
    Ok(new.iter().zip(old).map(|(a, b)| a - b).collect())
}

/// `w + d`.
pub fn apply_delta(w: &[f64], d: &[f64]) -> Result<ParamVector, ModelError> {
    check_len(w.len(), d.len())?;
    Ok(w.iter().zip(d).map(|(a, b)| a + b).collect())
}
