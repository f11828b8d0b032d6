// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::FedError;
use crate::model::SgdConfig;
use crate::privacy::DpParams;
use crate::rng::{derive_seed, tag};
use crate::sketch::SketchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Vanilla,
    Sketched,
}

/// Protocol hyperparameters of one federated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedConfig {
    pub num_rounds: usize,
    pub devices_per_round: usize,
    pub sgd: SgdConfig,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub sketch: Option<SketchConfig>,
    /// Fraction of recovered coordinates kept by each device.
    pub topk_fraction: f64,
    pub rng_seed: u64,
    /// Derive a fresh shared hash seed for every round from `sketch.seed`.
    /// When false, every round reuses `sketch.seed`.
    #[serde(default = "default_true")]
    pub rotate_sketch_seed: bool,
    /// Send the current global model densely to every chosen device instead of
    /// the sketched update.
    #[serde(default)]
    pub resync_full_model: bool,
    /// L2 bound applied to each device update before sketching.
    #[serde(default)]
    pub clip_norm: Option<f64>,
    /// Laplace noise added to each device sketch before upload.
    #[serde(default)]
    pub dp: Option<DpParams>,
}

fn default_true() -> bool {
    true
}

impl FedConfig {
    /// Sketch geometry and hash seed shared by every device in round `t`.
    /// With `rotate_sketch_seed` the seed is derived from `sketch.seed` and
    /// `t`, so decoding errors differ between rounds.
    pub fn round_sketch_config(&self, t: usize) -> Option<SketchConfig> {
        let mut sk = self.sketch?;
        if self.rotate_sketch_seed {
            sk.seed = derive_seed(sk.seed, &[tag::SKETCH, t as u64]);
        }
        Some(sk)
    }

    /// Checks the configuration against a federation of `num_devices` devices
    /// training a model with `num_params` parameters.
    pub fn validate(&self, num_devices: usize, num_params: usize) -> Result<(), FedError> {
        let cfg = |m: String| Err(FedError::Config(m));
        if self.devices_per_round == 0 || self.devices_per_round > num_devices {
            return cfg(format!(
                "devices_per_round must lie in [1, {num_devices}], got {}",
                self.devices_per_round
            ));
        }
        if !(self.topk_fraction > 0.0 && self.topk_fraction <= 1.0) {
            return cfg(format!(
                "topk_fraction must lie in (0, 1], got {}",
                self.topk_fraction
            ));
        }
        self.sgd
            .validate()
            .map_err(|e| FedError::Config(format!("sgd: {e}")))?;
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return cfg(format!("clip_norm must be positive, got {c}"));
            }
        }
        if let Some(dp) = &self.dp {
            dp.validate()
                .map_err(|e| FedError::Config(format!("dp: {e}")))?;
        }
        match self.algorithm {
            Algorithm::Vanilla => {
                if self.dp.is_some() || self.clip_norm.is_some() {
                    return cfg("dp and clip_norm apply only to the sketched algorithm".into());
                }
            }
            Algorithm::Sketched => {
                let Some(sk) = &self.sketch else {
                    return cfg("sketched algorithm requires a sketch configuration".into());
                };
                sk.validate()
                    .map_err(|e| FedError::Config(format!("sketch: {e}")))?;
                if sk.domain_size != num_params {
                    return cfg(format!(
                        "sketch domain_size {} does not match model parameter count {num_params}",
                        sk.domain_size
                    ));
                }
            }
        }
        Ok(())
    }
}
