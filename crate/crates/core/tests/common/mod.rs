// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use fedsketch::data::FederatedDataset;
use fedsketch::fedsim::{Algorithm, FedConfig};
use fedsketch::model::{Example, LinearModel, Model, SgdConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let denom = l2(b);
    if denom == 0.0 {
        l2(&diff)
    } else {
        l2(&diff) / denom
    }
}

/// Ordinary least squares on the pooled training set with a bias column,
/// solved through the normal equations.
pub fn least_squares_params(ds: &FederatedDataset) -> Vec<f64> {
    let rows: Vec<&Example> = ds.pooled_train().collect();
    let d = ds.feature_dim() + 1;
    let x = DMatrix::from_fn(rows.len(), d, |i, j| {
        if j + 1 < d {
            rows[i].features[j]
        } else {
            1.0
        }
    });
    let y = DVector::from_fn(rows.len(), |i, _| rows[i].label);
    let xt = x.transpose();
    let w = (&xt * &x)
        .lu()
        .solve(&(&xt * y))
        .expect("normal equations are singular");
    w.as_slice().to_vec()
}

pub fn least_squares_accuracy(ds: &FederatedDataset) -> f64 {
    let w = least_squares_params(ds);
    let model = LinearModel::new(ds.feature_dim()).unwrap();
    model.evaluate(&w, &ds.test_set).unwrap().accuracy
}

/// Central differences of `model.loss`, one coordinate at a time.
pub fn finite_difference_gradient<M: Model>(
    model: &M,
    params: &[f64],
    batch: &[Example],
    h: f64,
) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = model.loss(&p, batch).unwrap();
            p[i] = orig - h;
            let down = model.loss(&p, batch).unwrap();
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn vanilla_config(num_rounds: usize, k: usize, lr: f64, seed: u64) -> FedConfig {
    FedConfig {
        num_rounds,
        devices_per_round: k,
        sgd: SgdConfig {
            learning_rate: lr,
            batch_size: 10,
            local_epochs: 1,
            rng_seed: 0,
        },
        algorithm: Algorithm::Vanilla,
        sketch: None,
        topk_fraction: 1.0,
        rng_seed: seed,
        rotate_sketch_seed: true,
        resync_full_model: false,
        clip_norm: None,
        dp: None,
    }
}
