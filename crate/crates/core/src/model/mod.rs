// SPDX-License-Identifier: Apache-2.0

//! Trainable models over flat parameter vectors.
//!
//! Parameters live outside the model in a [`ParamVector`]; a model value only
//! describes the architecture. This keeps training a pure function of
//! `(params, data, config)`, which the federated simulator relies on.

mod linear;
mod mlp;
mod param;
mod sgd;

pub use linear::LinearModel;
pub use mlp::{MlpModel, MlpParams};
pub use param::{apply_delta, delta, ParamVector};
pub use sgd::{local_train, SgdConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("invalid input: {0}")]
    Input(String),
}

/// One labelled example. Binary tasks use labels `±1`; multiclass tasks use
/// the class index stored as a float.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Example {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

pub trait Model: Send + Sync {
    fn input_dim(&self) -> usize;

    fn num_params(&self) -> usize;

    fn init_params(&self, seed: u64) -> ParamVector;

    /// Mean per-example loss over `batch`.
    fn loss(&self, params: &[f64], batch: &[Example]) -> Result<f64, ModelError>;

    /// Mean per-example gradient over `batch`.
    fn gradient(&self, params: &[f64], batch: &[Example]) -> Result<ParamVector, ModelError>;

    fn predict(&self, params: &[f64], features: &[f64]) -> f64;

    /// Accuracy and mean loss on a held-out set.
    fn evaluate(&self, params: &[f64], test: &[Example]) -> Result<Evaluation, ModelError> {
        if test.is_empty() {
            return Err(ModelError::Empty("test set"));
        }
        let loss = self.loss(params, test)?;
        let correct = test
            .iter()
            .filter(|ex| self.predict(params, &ex.features) == ex.label)
            .count();
        Ok(Evaluation {
            accuracy: correct as f64 / test.len() as f64,
            loss,
        })
    }
}

/// Architecture choice as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Linear,
    Mlp { hidden: usize },
}

/// A concrete model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl AnyModel {
    pub fn build(
        kind: ModelKind,
        input_dim: usize,
        num_classes: usize,
    ) -> Result<Self, ModelError> {
        match kind {
            ModelKind::Linear => Ok(Self::Linear(LinearModel::new(input_dim)?)),
            ModelKind::Mlp { hidden } => {
                Ok(Self::Mlp(MlpModel::new(input_dim, hidden, num_classes)?))
            }
        }
    }

    fn inner(&self) -> &dyn Model {
        match self {
            Self::Linear(m) => m,
            Self::Mlp(m) => m,
        }
    }
}

impl Model for AnyModel {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn num_params(&self) -> usize {
        self.inner().num_params()
    }
    fn init_params(&self, seed: u64) -> ParamVector {
        self.inner().init_params(seed)
    }
    fn loss(&self, params: &[f64], batch: &[Example]) -> Result<f64, ModelError> {
        self.inner().loss(params, batch)
    }
    fn gradient(&self, params: &[f64], batch: &[Example]) -> Result<ParamVector, ModelError> {
        self.inner().gradient(params, batch)
    }
    fn predict(&self, params: &[f64], features: &[f64]) -> f64 {
        self.inner().predict(params, features)
    }
}

pub(crate) fn check_batch(
    params: &[f64],
    num_params: usize,
    batch: &[Example],
    input_dim: usize,
) -> Result<(), ModelError> {
    if params.len() != num_params {
        return Err(ModelError::DimMismatch {
            expected: num_params,
            got: params.len(),
        });
    }
    if batch.is_empty() {
        return Err(ModelError::Empty("batch"));
    }
    if let Some(ex) = batch.iter().find(|ex| ex.features.len() != input_dim) {
        return Err(ModelError::DimMismatch {
            expected: input_dim,
            got: ex.features.len(),
        });
    }
    Ok(())
}
