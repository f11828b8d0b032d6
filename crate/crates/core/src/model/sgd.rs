// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Example, Model, ModelError, ParamVector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub rng_seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::Input(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Input("batch_size must be at least 1".into()));
        }
        if self.local_epochs == 0 {
            return Err(ModelError::Input("local_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mini-batch SGD over `shard` starting from `start`.
///
/// Each epoch visits a fresh Fisher–Yates permutation of the shard drawn from
/// `cfg.rng_seed`; the last batch of an epoch may be short. A learning rate of
/// zero is accepted and returns `start` unchanged.
pub fn local_train<M: Model + ?Sized>(
    model: &M,
    start: &[f64],
    shard: &[Example],
    cfg: &SgdConfig,
) -> Result<ParamVector, ModelError> {
    if shard.is_empty() {
        return Err(ModelError::Empty("shard"));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) || cfg.batch_size == 0 {
        return Err(ModelError::Input("invalid sgd configuration".into()));
    }
    if start.len() != model.num_params() {
        return Err(ModelError::DimMismatch {
            expected: model.num_params(),
            got: start.len(),
        });
    }
    let mut params = ParamVector::from(start.to_vec());
    let mut rng = rng::rng_from(cfg.rng_seed, &[rng::tag::TRAIN]);
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| shard[i].clone()));
            let g = model.gradient(&params, &batch)?;
            params.axpy(-cfg.learning_rate, &g)?;
        }
    }
    Ok(params)
}
