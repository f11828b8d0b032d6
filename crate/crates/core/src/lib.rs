// SPDX-License-Identifier: Apache-2.0

//! Mergeable count sketches and a deterministic federated averaging simulator.
//!
//! Devices compress their model updates into a shared-seed [`sketch::CountSketch`];
//! the server merges and rescales the sketches, and devices recover an
//! approximate global update by point queries. [`fedsim`] runs both the dense
//! and the sketched protocol over synthetic heterogeneous data from [`data`].

pub mod data;
pub mod experiment;
pub mod fedsim;
pub mod model;
pub mod privacy;
pub mod rng;
pub mod sketch;

pub use model::ParamVector;
pub use sketch::{CountMinSketch, CountSketch, SketchConfig, SketchError};
