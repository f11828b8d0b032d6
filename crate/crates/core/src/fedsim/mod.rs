// SPDX-License-Identifier: Apache-2.0

//! Federated averaging over simulated devices.
//!
//! [`run_fedavg`] ships dense models both ways and averages the returned
//! models. [`run_fedavg_sketch`] ships dense `w^0` once per device, then only
//! Count Sketches of model updates: devices sketch their local update, the
//! server averages the sketches, and devices recover the global update from
//! the averaged sketch by point queries.
//!
//! Every random choice is derived from `FedConfig::rng_seed` and the round
//! index, and aggregation folds in ascending device id, so a run is a pure
//! function of its configuration and dataset.

mod config;
mod engine;
mod metrics;
mod sampling;

pub use config::{Algorithm, FedConfig};
pub use engine::{
    aggregate_sketches, average_params, run, run_fedavg, run_fedavg_sketch, RoundDiagnostics,
    ServerState,
};
pub(crate) use metrics::atomic_write;
pub use metrics::{emit_metrics_csv, write_metrics_csv, RoundMetrics, METRICS_HEADER};
pub use sampling::sample_devices;

use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelError;
use crate::privacy::PrivacyError;
use crate::sketch::SketchError;

/// Bytes of a dense `f64` parameter vector of length `n` on the wire. Dense
/// vectors carry no header.
pub fn dense_payload_bytes(n: usize) -> u64 {
    8 * n as u64
}

#[derive(Debug, Error)]
pub enum FedError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
