// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{finite_difference_gradient, gaussian_vec, rng};
use fedsketch::model::{
    local_train, AnyModel, Example, LinearModel, MlpModel, Model, ModelKind, SgdConfig,
};
use rand::Rng;

const H: f64 = 1e-5;

/// Largest `|a − f| / max(|a|, |f|, 1)` over coordinates; the unit floor keeps
/// near-zero partials from turning round-off into huge ratios.
fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn random_batch(
    r: &mut rand_chacha::ChaCha8Rng,
    dim: usize,
    size: usize,
    classes: usize,
) -> Vec<Example> {
    (0..size)
        .map(|_| {
            let label = if classes == 0 {
                r.random_range(-2.0..2.0)
            } else {
                r.random_range(0..classes) as f64
            };
            Example::new(gaussian_vec(r, dim), label)
        })
        .collect()
}

/// Whether any hidden pre-activation sits close enough to the ReLU kink for a
/// central difference to straddle it.
fn near_relu_kink(model: &MlpModel, params: &[f64], batch: &[Example]) -> bool {
    let p = model.unflatten(params).unwrap();
    let [input, hidden, _] = model.layer_dims();
    batch.iter().any(|ex| {
        (0..hidden).any(|h| {
            let pre = p.b1[h]
                + (0..input)
                    .map(|i| p.w1[h * input + i] * ex.features[i])
                    .sum::<f64>();
            pre.abs() < 1e-3
        })
    })
}

#[test]
fn linear_gradient_matches_finite_differences() {
    let mut r = rng(31);
    for _ in 0..20 {
        let dim = r.random_range(1..8);
        let model = LinearModel::new(dim).unwrap();
        let params = gaussian_vec(&mut r, dim + 1);
        let size = r.random_range(1..6);
        let batch = random_batch(&mut r, dim, size, 0);
        let analytic = model.gradient(&params, &batch).unwrap();
        let numeric = finite_difference_gradient(&model, &params, &batch, H);
        let err = max_rel_error(&analytic, &numeric);
        assert!(err <= 1e-6, "relative error {err}");
    }
}

#[test]
fn linear_gradient_worked_example() {
    // No-bias reading of w = [1, 0], x = [2, 1], y = 1: c = 2(2 − 1) = 2.
    let model = LinearModel::new(2).unwrap();
    let g = model
        .gradient(&[1.0, 0.0, 0.0], &[Example::new(vec![2.0, 1.0], 1.0)])
        .unwrap();
    assert_eq!(&g[..2], &[4.0, 2.0]);
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut r = rng(32);
    let mut checked = 0;
    while checked < 20 {
        let input = r.random_range(1..6);
        let hidden = r.random_range(1..5);
        let classes = r.random_range(2..5);
        let model = MlpModel::new(input, hidden, classes).unwrap();
        let params = gaussian_vec(&mut r, model.num_params());
        let size = r.random_range(1..5);
        let batch = random_batch(&mut r, input, size, classes);
        if near_relu_kink(&model, &params, &batch) {
            continue;
        }
        let analytic = model.gradient(&params, &batch).unwrap();
        let numeric = finite_difference_gradient(&model, &params, &batch, H);
        let err = max_rel_error(&analytic, &numeric);
        assert!(
            err <= 1e-6,
            "{input}-{hidden}-{classes}: relative error {err}"
        );
        checked += 1;
    }
}

#[test]
fn mlp_4_2_2_gradient_on_batch_of_three() {
    let mut r = rng(33);
    let model = MlpModel::new(4, 2, 2).unwrap();
    let (params, batch) = loop {
        let p = gaussian_vec(&mut r, model.num_params());
        let b = random_batch(&mut r, 4, 3, 2);
        if !near_relu_kink(&model, &p, &b) {
            break (p, b);
        }
    };
    let analytic = model.gradient(&params, &batch).unwrap();
    let numeric = finite_difference_gradient(&model, &params, &batch, H);
    assert!(max_rel_error(&analytic, &numeric) <= 1e-6);
}

#[test]
fn zero_model_on_random_labels_is_near_chance() {
    let mut r = rng(34);
    let model = LinearModel::new(5).unwrap();
    let test: Vec<Example> = (0..1000)
        .map(|_| {
            let y = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            Example::new(gaussian_vec(&mut r, 5), y)
        })
        .collect();
    let acc = model.evaluate(&[0.0; 6], &test).unwrap().accuracy;
    assert!((0.4..=0.6).contains(&acc), "{acc}");
}

#[test]
fn generating_model_classifies_its_separable_data_perfectly() {
    let mut r = rng(35);
    let truth = [1.5, -2.0, 0.5, 0.25];
    let data: Vec<Example> = (0..500)
        .map(|_| {
            let x = gaussian_vec(&mut r, 3);
            let s = truth[3] + (0..3).map(|i| truth[i] * x[i]).sum::<f64>();
            Example::new(x, if s >= 0.0 { 1.0 } else { -1.0 })
        })
        .collect();
    let model = LinearModel::new(3).unwrap();
    assert_eq!(model.evaluate(&truth, &data).unwrap().accuracy, 1.0);
}

#[test]
fn accuracy_stays_in_unit_interval_for_any_model() {
    let mut r = rng(36);
    let model = AnyModel::build(ModelKind::Mlp { hidden: 4 }, 3, 3).unwrap();
    let test = random_batch(&mut r, 3, 50, 3);
    for _ in 0..20 {
        let p = gaussian_vec(&mut r, model.num_params());
        let e = model.evaluate(&p, &test).unwrap();
        assert!((0.0..=1.0).contains(&e.accuracy));
        assert!(e.loss >= 0.0);
    }
}

#[test]
fn small_step_full_batch_descent_on_quadratic() {
    let mut r = rng(37);
    let model = LinearModel::new(4).unwrap();
    let shard = random_batch(&mut r, 4, 40, 0);
    let cfg = SgdConfig {
        learning_rate: 0.01,
        batch_size: shard.len(),
        local_epochs: 1,
        rng_seed: 0,
    };
    let mut w = model.init_params(0);
    let mut prev = model.loss(&w, &shard).unwrap();
    for _ in 0..50 {
        w = local_train(&model, &w, &shard, &cfg).unwrap();
        let now = model.loss(&w, &shard).unwrap();
        assert!(now < prev);
        prev = now;
    }
}
