// SPDX-License-Identifier: Apache-2.0

//! On-disk layout: one CSV per shard (`shard_000.csv`, …), `test.csv`, and a
//! `manifest.json` naming the spec and the shard files. Each CSV has the
//! header `feature_0,…,feature_{d-1},label`; values carry 17 significant
//! digits so floats round-trip exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DataError, DeviceShard, FederatedDataset, SyntheticSpec};
use crate::model::Example;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TEST_FILE: &str = "test.csv";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    spec: SyntheticSpec,
    shards: Vec<ShardEntry>,
    test_file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardEntry {
    device_id: usize,
    file: String,
    num_samples: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(dim: usize) -> Vec<String> {
    (0..dim)
        .map(|i| format!("feature_{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect()
}

fn write_examples(path: &Path, dim: usize, examples: &[Example]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io_err(path, e))?;
    w.write_record(header(dim))
        .map_err(|e| csv_io_err(path, e))?;
    for ex in examples {
        let row = ex
            .features
            .iter()
            .chain(std::iter::once(&ex.label))
            .map(|&x| fmt_f64(x));
        w.write_record(row).map_err(|e| csv_io_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_io_err(path: &Path, e: csv::Error) -> DataError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => DataError::Parse {
            path: path.to_path_buf(),
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn read_examples(path: &Path, dim: usize) -> Result<Vec<Example>, DataError> {
    if !path.is_file() {
        return Err(DataError::NotFound(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_io_err(path, e))?;
    let expected = header(dim);
    let got = r.headers().map_err(|e| csv_io_err(path, e))?.clone();
    if got.iter().ne(expected.iter().map(String::as_str)) {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header with {dim} features and a label"),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_io_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |reason: String| DataError::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if rec.len() != dim + 1 {
            return Err(parse_err(format!(
                "expected {} fields, got {}",
                dim + 1,
                rec.len()
            )));
        }
        let mut values = Vec::with_capacity(dim + 1);
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        let label = values.pop().unwrap();
        out.push(Example::new(values, label));
    }
    Ok(out)
}

/// Writes the dataset into `dir`, creating it if needed.
pub fn save_csv(ds: &FederatedDataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let dim = ds.feature_dim();
    let mut shards = Vec::with_capacity(ds.shards.len());
    for shard in &ds.shards {
        let file = format!("shard_{:03}.csv", shard.device_id);
        write_examples(&dir.join(&file), dim, &shard.examples)?;
        shards.push(ShardEntry {
            device_id: shard.device_id,
            file,
            num_samples: shard.num_samples(),
        });
    }
    write_examples(&dir.join(TEST_FILE), dim, &ds.test_set)?;
    let manifest = Manifest {
        spec: ds.spec.clone(),
        shards,
        test_file: TEST_FILE.to_string(),
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(io_err(&path))
}

/// Loads a dataset written by [`save_csv`].
pub fn load_csv(dir: &Path) -> Result<FederatedDataset, DataError> {
    let manifest_path: PathBuf = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(DataError::NotFound(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DataError::Manifest {
        path: manifest_path.clone(),
        reason: e.to_string(),
    })?;
    manifest.spec.validate()?;
    let dim = manifest.spec.feature_dim;

    let mut shards = Vec::with_capacity(manifest.shards.len());
    for entry in &manifest.shards {
        let path = dir.join(&entry.file);
        let examples = read_examples(&path, dim)?;
        if examples.len() != entry.num_samples || examples.is_empty() {
            return Err(DataError::Manifest {
                path: manifest_path.clone(),
                reason: format!(
                    "{} lists {} samples, file has {}",
                    entry.file,
                    entry.num_samples,
                    examples.len()
                ),
            });
        }
        shards.push(DeviceShard {
            device_id: entry.device_id,
            examples,
        });
    }
    let test_set = read_examples(&dir.join(&manifest.test_file), dim)?;
    Ok(FederatedDataset {
        spec: manifest.spec,
        shards,
        test_set,
    })
}
