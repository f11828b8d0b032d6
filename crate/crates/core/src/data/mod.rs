// SPDX-License-Identifier: Apache-2.0

//! Heterogeneous synthetic federated datasets.
//!
//! Each device `k` draws its size from a log-normal matched to the requested
//! mean/stdev, its own labelling model `u_k = u_0 + α·z_k` around a shared
//! model `u_0`, and its own feature mean `v_k = β·z'_k`. Features are
//! `x ~ N(v_k, I)`. With `α = β = 0` every device samples the same
//! distribution.

mod csv_io;

pub use csv_io::{load_csv, save_csv, MANIFEST_FILE, TEST_FILE};

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::model::Example;
use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid dataset spec: {0}")]
    Config(String),
    #[error("not found: {0}")]
    NotFound(PathBuf),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("malformed manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Label type of the generated task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelKind {
    /// `y = sign(u_k · x) ∈ {-1, +1}`.
    #[default]
    Binary,
    /// `y = argmax_c (U_k x)_c ∈ {0, …, classes−1}`.
    Multiclass { classes: usize },
}

impl LabelKind {
    pub fn num_classes(&self) -> usize {
        match self {
            Self::Binary => 2,
            Self::Multiclass { classes } => *classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_devices: usize,
    pub samples_mean: f64,
    pub samples_stdev: f64,
    pub feature_dim: usize,
    pub heterogeneity_alpha: f64,
    pub heterogeneity_beta: f64,
    pub label_noise: f64,
    pub test_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub labels: LabelKind,
}

impl Default for SyntheticSpec {
    /// Thirty devices with 115 ± 58 samples each and 60 features.
    fn default() -> Self {
        Self {
            num_devices: 30,
            samples_mean: 115.0,
            samples_stdev: 58.0,
            feature_dim: 60,
            heterogeneity_alpha: 1.0,
            heterogeneity_beta: 1.0,
            label_noise: 0.0,
            test_fraction: 0.2,
            seed: 1,
            labels: LabelKind::Binary,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Config(m));
        if self.num_devices == 0 {
            return bad("num_devices must be at least 1".into());
        }
        if !(self.samples_mean.is_finite() && self.samples_mean > 0.0) {
            return bad(format!(
                "samples_mean must be positive, got {}",
                self.samples_mean
            ));
        }
        if !(self.samples_stdev.is_finite() && self.samples_stdev >= 0.0) {
            return bad(format!(
                "samples_stdev must be non-negative, got {}",
                self.samples_stdev
            ));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be at least 1".into());
        }
        for (name, v) in [
            ("heterogeneity_alpha", self.heterogeneity_alpha),
            ("heterogeneity_beta", self.heterogeneity_beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad(format!(
                "label_noise must lie in [0, 1), got {}",
                self.label_noise
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.labels.num_classes() < 2 {
            return bad("multiclass labels need at least 2 classes".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceShard {
    pub device_id: usize,
    pub examples: Vec<Example>,
}

impl DeviceShard {
    /// Sampling weight of the device.
    pub fn num_samples(&self) -> usize {
        self.examples.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    pub spec: SyntheticSpec,
    pub shards: Vec<DeviceShard>,
    pub test_set: Vec<Example>,
}

impl FederatedDataset {
    pub fn feature_dim(&self) -> usize {
        self.spec.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.spec.labels.num_classes()
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        self.shards.iter().map(DeviceShard::num_samples).collect()
    }

    /// All training examples in ascending device order.
    pub fn pooled_train(&self) -> impl Iterator<Item = &Example> {
        self.shards.iter().flat_map(|s| s.examples.iter())
    }
}

/// Log-normal `(μ, σ)` whose mean and standard deviation are `mean` and `stdev`.
pub fn lognormal_params(mean: f64, stdev: f64) -> (f64, f64) {
    let sigma2 = (1.0 + (stdev / mean).powi(2)).ln();
    (mean.ln() - 0.5 * sigma2, sigma2.sqrt())
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

struct DeviceDistribution {
    /// One scorer row per class (a single row for binary labels).
    scorers: Vec<Vec<f64>>,
    feature_mean: Vec<f64>,
}

impl DeviceDistribution {
    fn sample(&self, rng: &mut ChaCha8Rng, labels: LabelKind, noise: f64) -> Example {
        let x: Vec<f64> = self
            .feature_mean
            .iter()
            .map(|m| m + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let score = |row: &Vec<f64>| row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let flip = noise > 0.0 && rng.random::<f64>() < noise;
        let label = match labels {
            LabelKind::Binary => {
                let y = if score(&self.scorers[0]) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                if flip {
                    -y
                } else {
                    y
                }
            }
            LabelKind::Multiclass { classes } => {
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for (c, row) in self.scorers.iter().enumerate() {
                    let s = score(row);
                    if s > best_score {
                        best = c;
                        best_score = s;
                    }
                }
                if flip {
                    // Uniform over the other classes.
                    let shift = rng.random_range(1..classes);
                    best = (best + shift) % classes;
                }
                best as f64
            }
        };
        Example::new(x, label)
    }
}

/// Generates a dataset; a pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FederatedDataset, DataError> {
    spec.validate()?;
    let dim = spec.feature_dim;
    let rows = match spec.labels {
        LabelKind::Binary => 1,
        LabelKind::Multiclass { classes } => classes,
    };

    let mut master = rng::rng_from(spec.seed, &[rng::tag::DATA]);
    let base: Vec<Vec<f64>> = (0..rows)
        .map(|_| gaussian_vec(&mut master, dim, 1.0))
        .collect();
    let sizes = shard_sizes(&mut master, spec)?;

    let mut shards = Vec::with_capacity(spec.num_devices);
    let mut test_set = Vec::new();
    let test_ratio = spec.test_fraction / (1.0 - spec.test_fraction);
    for (k, &m) in sizes.iter().enumerate() {
        let mut rng = rng::rng_from(spec.seed, &[rng::tag::DATA, k as u64]);
        let scorers = base
            .iter()
            .map(|u0| {
                let z = gaussian_vec(&mut rng, dim, spec.heterogeneity_alpha);
                u0.iter().zip(z).map(|(a, b)| a + b).collect()
            })
            .collect();
        let dist = DeviceDistribution {
            scorers,
            feature_mean: gaussian_vec(&mut rng, dim, spec.heterogeneity_beta),
        };
        let examples = (0..m)
            .map(|_| dist.sample(&mut rng, spec.labels, spec.label_noise))
            .collect();
        shards.push(DeviceShard {
            device_id: k,
            examples,
        });
        let n_test = (m as f64 * test_ratio).round() as usize;
        test_set.extend((0..n_test).map(|_| dist.sample(&mut rng, spec.labels, spec.label_noise)));
    }
    if test_set.is_empty() {
        let mut rng = rng::rng_from(spec.seed, &[rng::tag::DATA, u64::MAX]);
        let dist = DeviceDistribution {
            scorers: base,
            feature_mean: vec![0.0; dim],
        };
        test_set.push(dist.sample(&mut rng, spec.labels, spec.label_noise));
    }
    Ok(FederatedDataset {
        spec: spec.clone(),
        shards,
        test_set,
    })
}

/// Shard sizes from the log-normal matched to `(samples_mean, samples_stdev)`.
///
/// Draws are stratified: device `π(k)` gets the quantile of a uniform point in
/// the `k`-th of `N` equal-probability strata, for a random permutation `π`.
/// Sizes are rounded and clipped to at least one sample.
fn shard_sizes(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Result<Vec<usize>, DataError> {
    let n = spec.num_devices;
    if spec.samples_stdev == 0.0 {
        return Ok(vec![spec.samples_mean.round().max(1.0) as usize; n]);
    }
    let (mu, sigma) = lognormal_params(spec.samples_mean, spec.samples_stdev);
    let normal = Normal::new(0.0, 1.0).map_err(|e| DataError::Config(e.to_string()))?;
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    Ok(strata
        .into_iter()
        .map(|k| {
            let u = (k as f64 + rng.random::<f64>()) / n as f64;
            let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            let z = normal.inverse_cdf(u);
            (mu + sigma * z).exp().round().max(1.0) as usize
        })
        .collect())
}
