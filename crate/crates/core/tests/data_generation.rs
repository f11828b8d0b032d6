// SPDX-License-Identifier: Apache-2.0

mod common;

use common::least_squares_accuracy;
use fedsketch::data::{generate_synthetic, load_csv, save_csv, DataError, SyntheticSpec};
use fedsketch::model::{Example, LinearModel, Model};
use nalgebra::{DMatrix, DVector};

fn spec(dim: usize, alpha_beta: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        feature_dim: dim,
        heterogeneity_alpha: alpha_beta,
        heterogeneity_beta: alpha_beta,
        seed,
        ..Default::default()
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

fn shard_least_squares(examples: &[Example]) -> Vec<f64> {
    let d = examples[0].features.len() + 1;
    let x = DMatrix::from_fn(examples.len(), d, |i, j| {
        if j + 1 < d {
            examples[i].features[j]
        } else {
            1.0
        }
    });
    let y = DVector::from_fn(examples.len(), |i, _| examples[i].label);
    x.svd(true, true)
        .solve(&y, 1e-12)
        .unwrap()
        .as_slice()
        .to_vec()
}

#[test]
fn shard_sizes_match_the_target_profile() {
    let ds = generate_synthetic(&spec(10, 1.0, 1)).unwrap();
    assert_eq!(ds.shards.len(), 30);
    let sizes: Vec<f64> = ds.shard_sizes().iter().map(|&s| s as f64).collect();
    let (m, sd) = mean_sd(&sizes);
    assert!((m - 115.0).abs() <= 0.2 * 115.0, "mean {m}");
    assert!((sd - 58.0).abs() <= 0.2 * 58.0, "stdev {sd}");
    assert!(ds.shards.iter().all(|s| s.num_samples() >= 1));
}

/// Perceptron run until an epoch without mistakes; terminates on separable
/// data. Returns `[w, bias]`.
fn perceptron(examples: &[&Example], max_epochs: usize) -> Option<Vec<f64>> {
    let d = examples[0].features.len();
    let mut w = vec![0.0; d + 1];
    for _ in 0..max_epochs {
        let mut mistakes = 0;
        for ex in examples {
            let s = w[d]
                + ex.features
                    .iter()
                    .zip(&w)
                    .map(|(x, wi)| x * wi)
                    .sum::<f64>();
            if s * ex.label <= 0.0 {
                mistakes += 1;
                for (wi, x) in w.iter_mut().zip(&ex.features) {
                    *wi += ex.label * x;
                }
                w[d] += ex.label;
            }
        }
        if mistakes == 0 {
            return Some(w);
        }
    }
    None
}

#[test]
fn homogeneous_data_is_fit_by_one_linear_model() {
    let ds = generate_synthetic(&spec(10, 0.0, 1)).unwrap();
    let train: Vec<&Example> = ds.pooled_train().collect();
    let w = perceptron(&train, 10_000).expect("pooled data should be separable");
    let model = LinearModel::new(10).unwrap();
    let acc = model.evaluate(&w, &ds.test_set).unwrap().accuracy;
    assert!(acc >= 0.99, "{acc}");
    // Least squares on ±1 targets is not a max-margin fit but stays close.
    assert!(least_squares_accuracy(&ds) >= 0.95);
}

#[test]
fn generation_is_a_pure_function_of_the_spec() {
    let a = generate_synthetic(&spec(8, 1.0, 5)).unwrap();
    let b = generate_synthetic(&spec(8, 1.0, 5)).unwrap();
    assert_eq!(a, b);
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    save_csv(&a, dir_a.path()).unwrap();
    save_csv(&b, dir_b.path()).unwrap();
    for name in [
        "shard_000.csv",
        "shard_029.csv",
        "test.csv",
        "manifest.json",
    ] {
        let fa = std::fs::read(dir_a.path().join(name)).unwrap();
        let fb = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(fa, fb, "{name}");
    }
    let c = generate_synthetic(&spec(8, 1.0, 6)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn per_shard_optima_spread_more_under_heterogeneity() {
    let dim = 5;
    let spread = |alpha_beta: f64, seed: u64| {
        let ds = generate_synthetic(&spec(dim, alpha_beta, seed)).unwrap();
        let fits: Vec<Vec<f64>> = ds
            .shards
            .iter()
            .filter(|s| s.num_samples() >= 4 * (dim + 1))
            .map(|s| shard_least_squares(&s.examples))
            .collect();
        assert!(fits.len() >= 10);
        (0..=dim)
            .map(|j| {
                mean_sd(&fits.iter().map(|f| f[j]).collect::<Vec<_>>())
                    .1
                    .powi(2)
            })
            .sum::<f64>()
    };
    for seed in 0..10 {
        let (calm, wild) = (spread(0.0, seed), spread(1.0, seed));
        assert!(calm < wild, "seed {seed}: {calm} vs {wild}");
    }
}

#[test]
fn test_set_is_disjoint_from_training_shards() {
    let ds = generate_synthetic(&spec(6, 1.0, 2)).unwrap();
    assert!(!ds.test_set.is_empty());
    let train: Vec<&Vec<f64>> = ds.pooled_train().map(|e| &e.features).collect();
    assert!(ds.test_set.iter().all(|t| !train.contains(&&t.features)));
}

#[test]
fn csv_layout_and_round_trip() {
    let ds = generate_synthetic(&spec(7, 1.0, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_csv(&ds, dir.path()).unwrap();
    let csv_files = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .and_then(|x| x.to_str())
                == Some("csv")
        })
        .count();
    assert_eq!(csv_files, 31);
    assert_eq!(load_csv(dir.path()).unwrap(), ds);
}

#[test]
fn loading_reports_missing_and_malformed_input() {
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_csv(empty.path()),
        Err(DataError::NotFound(_))
    ));

    let ds = generate_synthetic(&spec(3, 1.0, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_csv(&ds, dir.path()).unwrap();
    let shard = dir.path().join("shard_001.csv");
    let mut text = std::fs::read_to_string(&shard).unwrap();
    text.push_str("1.0,oops,2.0,1\n");
    std::fs::write(&shard, text).unwrap();
    match load_csv(dir.path()) {
        Err(DataError::Parse { line, .. }) => {
            assert_eq!(line, ds.shards[1].num_samples() as u64 + 2)
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn infeasible_specs_are_rejected() {
    let bad = SyntheticSpec {
        samples_mean: 0.0,
        ..Default::default()
    };
    assert!(matches!(
        generate_synthetic(&bad),
        Err(DataError::Config(_))
    ));
}
