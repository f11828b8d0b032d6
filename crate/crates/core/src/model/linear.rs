// SPDX-License-Identifier: Apache-2.0

use super::{check_batch, Example, Model, ModelError, ParamVector};

/// Squared-loss linear classifier with labels `±1`.
///
/// Parameters are `input_dim` weights followed by one bias; the bias acts on
/// a constant feature `1.0`. Prediction is `sign(w·x + b)` with `sign(0) = +1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    input_dim: usize,
}

impl LinearModel {
    pub fn new(input_dim: usize) -> Result<Self, ModelError> {
        if input_dim == 0 {
            return Err(ModelError::Input(
                "linear model needs at least one feature".into(),
            ));
        }
        Ok(Self { input_dim })
    }

    #[inline]
    pub fn score(&self, params: &[f64], features: &[f64]) -> f64 {
        let (w, b) = params.split_at(self.input_dim);
        w.iter().zip(features).map(|(a, x)| a * x).sum::<f64>() + b[0]
    }
}

impl Model for LinearModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_params(&self) -> usize {
        self.input_dim + 1
    }

    fn init_params(&self, _seed: u64) -> ParamVector {
        ParamVector::zeros(self.num_params())
    }

    fn loss(&self, params: &[f64], batch: &[Example]) -> Result<f64, ModelError> {
        check_batch(params, self.num_params(), batch, self.input_dim)?;
        let total: f64 = batch
            .iter()
            .map(|ex| {
                let r = self.score(params, &ex.features) - ex.label;
                r * r
            })
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// Per example `2(w·x − y)·[x, 1]`, averaged.
    fn gradient(&self, params: &[f64], batch: &[Example]) -> Result<ParamVector, ModelError> {
        check_batch(params, self.num_params(), batch, self.input_dim)?;
        let mut grad = ParamVector::zeros(self.num_params());
        let inv = 1.0 / batch.len() as f64;
        for ex in batch {
            let c = 2.0 * (self.score(params, &ex.features) - ex.label) * inv;
            for (g, x) in grad.iter_mut().zip(&ex.features) {
                *g += c * x;
            }
            grad[self.input_dim] += c;
        }
        Ok(grad)
    }

    fn predict(&self, params: &[f64], features: &[f64]) -> f64 {
        if self.score(params, features) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}
