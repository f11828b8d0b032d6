// SPDX-License-Identifier: Apache-2.0

//! Privacy utilities for sketched updates: the `1/n` identity-recovery bound,
//! Laplace noising of sketch counters, and a guessing-attack experiment that
//! measures how often an adversary identifies a planted coordinate.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};
use thiserror::Error;

use crate::model::ParamVector;
use crate::rng;
use crate::sketch::{CountSketch, SketchConfig, SketchError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("invalid privacy parameter: {0}")]
    Input(String),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Laplace mechanism parameters. `sensitivity` is the L1 change in the
/// counters caused by altering one input element; callers bound it, e.g. with
/// [`clip_l2`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpParams {
    pub epsilon: f64,
    pub sensitivity: f64,
}

impl DpParams {
    pub fn new(epsilon: f64, sensitivity: f64) -> Result<Self, PrivacyError> {
        let p = Self {
            epsilon,
            sensitivity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PrivacyError> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(PrivacyError::Input(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.sensitivity.is_finite() && self.sensitivity > 0.0) {
            return Err(PrivacyError::Input(format!(
                "sensitivity must be positive, got {}",
                self.sensitivity
            )));
        }
        Ok(())
    }

    /// Laplace scale `b = sensitivity / epsilon`.
    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }
}

/// Probability that an adversary who recovers every value of an `n`-vector,
/// but none of the identities, assigns a value to its true index: `1/n`.
pub fn reconstruction_bound(n: usize) -> Result<f64, PrivacyError> {
    if n == 0 {
        return Err(PrivacyError::Input("domain size must be at least 1".into()));
    }
    Ok(1.0 / n as f64)
}

/// One Laplace(0, b) draw by inverse CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    // u uniform on (-1/2, 1/2); the endpoint -1/2 would give ln(0).
    let mut u: f64 = rng.random::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.random::<f64>() - 0.5;
    }
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Copy of `sk` with independent Laplace(sensitivity/epsilon) noise on every
/// counter.
pub fn add_laplace_noise(
    sk: &CountSketch,
    dp: &DpParams,
    noise_seed: u64,
) -> Result<CountSketch, PrivacyError> {
    dp.validate()?;
    let b = dp.scale();
    let mut rng = rng::rng_from(noise_seed, &[rng::tag::NOISE]);
    let mut out = sk.clone();
    for c in out.counters_mut() {
        *c += sample_laplace(&mut rng, b);
    }
    Ok(out)
}

/// Scales `v` down to L2 norm `clip_norm` if it is longer.
pub fn clip_l2(v: &[f64], clip_norm: f64) -> Result<ParamVector, PrivacyError> {
    if !(clip_norm.is_finite() && clip_norm > 0.0) {
        return Err(PrivacyError::Input(format!(
            "clip_norm must be positive, got {clip_norm}"
        )));
    }
    let mut out = ParamVector::from(v.to_vec());
    let norm = out.l2_norm();
    if norm > clip_norm {
        out.scale(clip_norm / norm);
    }
    Ok(out)
}

/// What the attacker knows besides the counters and the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    /// No hash seed: guesses an index uniformly at random.
    Seedless,
    /// Knows the hash seed: decodes all coordinates and picks the largest.
    Seeded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackReport {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub baseline_rate: f64,
}

impl AttackReport {
    pub const CSV_HEADER: &'static str = "trials,successes,success_rate,baseline_rate";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.trials, self.successes, self.success_rate, self.baseline_rate
        )
    }

    /// Two-sided exact binomial test of `successes` against `baseline_rate`:
    /// total probability of outcomes no more likely than the observed one.
    pub fn binomial_p_value(&self) -> f64 {
        let p = self.baseline_rate;
        if p >= 1.0 {
            return if self.successes == self.trials {
                1.0
            } else {
                0.0
            };
        }
        let dist = Binomial::new(p, self.trials).expect("baseline rate in [0, 1]");
        let observed = dist.pmf(self.successes);
        let tol = observed * (1.0 + 1e-7);
        let total: f64 = (0..=self.trials)
            .map(|k| dist.pmf(k))
            .filter(|&q| q <= tol)
            .sum();
        total.min(1.0)
    }
}

/// Plants a single coordinate of value 1.0 at a uniformly random index of an
/// `n`-vector, sketches it under a per-trial hash seed, and asks `adversary`
/// for the index. Trials run in parallel on derived seeds; the report does not
/// depend on scheduling.
pub fn guessing_attack_experiment(
    n: usize,
    rows: usize,
    width: usize,
    trials: u64,
    seed: u64,
    adversary: Adversary,
) -> Result<AttackReport, PrivacyError> {
    if trials == 0 {
        return Err(PrivacyError::Input("trials must be at least 1".into()));
    }
    let baseline_rate = reconstruction_bound(n)?;
    SketchConfig::new(rows, width, 0, n)?;

    let successes = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64, PrivacyError> {
            let mut rng = rng::rng_from(seed, &[rng::tag::ATTACK, t]);
            let planted = rng.random_range(0..n);
            let hidden_seed: u64 = rng.random();
            let cfg = SketchConfig::new(rows, width, hidden_seed, n)?;
            let mut sk = CountSketch::new(cfg)?;
            sk.insert(planted, 1.0)?;
            let guess = match adversary {
                Adversary::Seedless => rng.random_range(0..n),
                Adversary::Seeded => decode_largest(&sk),
            };
            Ok(u64::from(guess == planted))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    Ok(AttackReport {
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        baseline_rate,
    })
}

/// Index of the largest-magnitude estimate; lower index on ties.
fn decode_largest(sk: &CountSketch) -> usize {
    let est = sk.query_vector();
    let mut best = 0;
    for (i, v) in est.iter().enumerate() {
        if v.abs() > est[best].abs() {
            best = i;
        }
    }
    best
}
