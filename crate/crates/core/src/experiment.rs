// SPDX-License-Identifier: Apache-2.0

//! Experiment driver behind the `fedsketch` binary.
//!
//! A run is described by one JSON document ([`ExperimentConfig`]). Command
//! line flags are applied to the parsed JSON before it is typed, so every
//! flag has an equivalent dotted path (`--fed.devices_per_round 10`). All
//! cross-field constraints are checked before any data is generated, and the
//! fully resolved document is written next to the results so that the run
//! can be repeated exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::data::{
    generate_synthetic, load_csv, save_csv, FederatedDataset, LabelKind, SyntheticSpec,
};
use crate::fedsim::{self, Algorithm, FedConfig, FedError, ServerState};
use crate::model::{AnyModel, Model, ModelKind, SgdConfig};
use crate::privacy::{guessing_attack_experiment, Adversary, AttackReport, DpParams};
use crate::rng::{derive_seed, tag};
use crate::sketch::{SketchConfig, DEFAULT_ROWS};

pub const METRICS_FILE: &str = "metrics.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const ATTACK_REPORT_FILE: &str = "attack_report.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn runtime_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Runtime(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Synthetic dataset to generate. Exactly one of `data` and `data_dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<SyntheticSpec>,
    /// Directory written by [`save_csv`] to load instead of generating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    pub model: ModelKind,
    pub fed: FedSection,
    #[serde(default)]
    pub dp: Option<DpParams>,
    #[serde(default)]
    pub attack: Option<AttackSection>,
    /// Also write the dataset under `<output_dir>/data`.
    #[serde(default)]
    pub save_data: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedSection {
    pub num_rounds: usize,
    pub devices_per_round: usize,
    pub sgd: SgdConfig,
    pub algorithm: Algorithm,
    /// Defaults to 1.0 for the linear model and 0.2 for the MLP.
    #[serde(default)]
    pub topk_fraction: Option<f64>,
    pub rng_seed: u64,
    /// Target `n / (d·w)`; resolved into `sketch` with `d = 5`.
    #[serde(default)]
    pub compression: Option<f64>,
    #[serde(default)]
    pub sketch: Option<SketchSection>,
    #[serde(default = "default_true")]
    pub rotate_sketch_seed: bool,
    #[serde(default)]
    pub resync_full_model: bool,
    #[serde(default)]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchSection {
    pub rows: usize,
    pub width: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub trials: u64,
    pub seed: u64,
}

/// Flag-level overrides, applied in field order before dotted overrides.
/// `(dotted.path, raw value)` override pairs.
pub type DottedPairs = Vec<(String, String)>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub compression: Option<f64>,
    pub algorithm: Option<Algorithm>,
    pub seed: Option<u64>,
    /// `(dotted.path, raw value)`; values that parse as JSON are used as
    /// JSON, anything else as a string.
    pub dotted: DottedPairs,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    /// Fully explicit config; what `resolved_config.json` contains.
    pub config: ExperimentConfig,
    pub dataset: FederatedDataset,
    pub model: AnyModel,
    pub fed: FedConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub rounds: usize,
    pub final_accuracy: Option<f64>,
    pub total_bytes: u64,
    pub attack: Option<AttackReport>,
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ExperimentError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("malformed override path {path:?}")));
    }
    let mut cur = root;
    for part in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| config_err(format!("{path}: parent is not an object")))?;
        let entry = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        if entry.is_null() {
            *entry = Value::Object(Map::new());
        }
        cur = entry;
    }
    cur.as_object_mut()
        .ok_or_else(|| config_err(format!("{path}: parent is not an object")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn apply_overrides(doc: &mut Value, ov: &Overrides) -> Result<(), ExperimentError> {
    if let Some(dir) = &ov.output_dir {
        set_path(
            doc,
            "output_dir",
            Value::String(dir.to_string_lossy().into_owned()),
        )?;
    }
    if let Some(seed) = ov.seed {
        set_path(doc, "fed.rng_seed", seed.into())?;
        if doc.get("data").is_some_and(|d| !d.is_null()) {
            set_path(doc, "data.seed", seed.into())?;
        }
    }
    if let (Some(Algorithm::Vanilla), Some(_)) = (ov.algorithm, ov.compression) {
        return Err(config_err("--compression requires the sketched algorithm"));
    }
    if let Some(alg) = ov.algorithm {
        set_path(
            doc,
            "fed.algorithm",
            serde_json::to_value(alg).expect("enum serializes"),
        )?;
    }
    if let Some(r) = ov.compression {
        set_path(doc, "fed.compression", r.into())?;
        set_path(doc, "fed.algorithm", Value::String("sketched".into()))?;
    }
    for (path, raw) in &ov.dotted {
        set_path(doc, path, parse_override_value(raw))?;
    }
    Ok(())
}

/// Parses a config document, applies overrides, and checks every cross-field
/// constraint. Generates (or loads) the dataset only after the checks pass.
pub fn resolve(doc: &str, ov: &Overrides) -> Result<ResolvedExperiment, ExperimentError> {
    let mut value: Value =
        serde_json::from_str(doc).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
    apply_overrides(&mut value, ov)?;
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| config_err(e.to_string()))?;
    resolve_config(config)
}

pub fn resolve_file(path: &Path, ov: &Overrides) -> Result<ResolvedExperiment, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    resolve(&text, ov)
}

fn resolve_config(mut config: ExperimentConfig) -> Result<ResolvedExperiment, ExperimentError> {
    let spec = match (&config.data, &config.data_dir) {
        (Some(spec), None) => {
            spec.validate()
                .map_err(|e| config_err(format!("data: {e}")))?;
            spec.clone()
        }
        (None, Some(dir)) => load_csv(dir).map_err(runtime_err)?.spec,
        _ => {
            return Err(config_err(
                "exactly one of `data` and `data_dir` must be given",
            ))
        }
    };

    let num_classes = match (config.model, spec.labels) {
        (ModelKind::Linear, LabelKind::Binary) => 2,
        (ModelKind::Mlp { .. }, LabelKind::Multiclass { classes }) => classes,
        (ModelKind::Linear, _) => {
            return Err(config_err(
                "model: linear model needs data.labels of type binary",
            ))
        }
        (ModelKind::Mlp { .. }, _) => {
            return Err(config_err(
                "model: mlp model needs data.labels of type multiclass",
            ))
        }
    };
    let model = AnyModel::build(config.model, spec.feature_dim, num_classes)
        .map_err(|e| config_err(format!("model: {e}")))?;
    let n = model.num_params();

    let fed = &mut config.fed;
    if fed.devices_per_round == 0 || fed.devices_per_round > spec.num_devices {
        return Err(config_err(format!(
            "fed.devices_per_round must lie in [1, data.num_devices = {}], got {}",
            spec.num_devices, fed.devices_per_round
        )));
    }
    let topk = fed.topk_fraction.unwrap_or(match config.model {
        ModelKind::Linear => 1.0,
        ModelKind::Mlp { .. } => 0.2,
    });
    fed.topk_fraction = Some(topk);

    let sketch = match (fed.algorithm, fed.compression, fed.sketch) {
        (Algorithm::Vanilla, None, None) => None,
        (Algorithm::Vanilla, _, _) => {
            return Err(config_err(
                "fed.compression and fed.sketch require fed.algorithm = sketched",
            ))
        }
        (Algorithm::Sketched, Some(_), Some(_)) => {
            return Err(config_err(
                "fed.compression and explicit fed.sketch (rows, width) are mutually exclusive",
            ))
        }
        (Algorithm::Sketched, None, None) => {
            return Err(config_err(
                "fed.algorithm = sketched needs fed.compression or fed.sketch",
            ))
        }
        (Algorithm::Sketched, Some(ratio), None) => {
            let width = SketchConfig::width_for_ratio(n, DEFAULT_ROWS, ratio)
                .map_err(|e| config_err(format!("fed.compression: {e}")))?;
            Some(SketchSection {
                rows: DEFAULT_ROWS,
                width,
                seed: derive_seed(fed.rng_seed, &[tag::SKETCH]),
            })
        }
        (Algorithm::Sketched, None, Some(s)) => Some(s),
    };
    fed.compression = None;
    fed.sketch = sketch;
    let sketch = sketch
        .map(|s| SketchConfig::new(s.rows, s.width, s.seed, n))
        .transpose()
        .map_err(|e| config_err(format!("fed.sketch: {e}")))?;

    if config.dp.is_some() && fed.algorithm == Algorithm::Vanilla {
        return Err(config_err("dp requires fed.algorithm = sketched"));
    }
    if config.attack.is_some() && sketch.is_none() {
        return Err(config_err("attack requires a sketched run"));
    }
    if let Some(a) = &config.attack {
        if a.trials == 0 {
            return Err(config_err("attack.trials must be at least 1"));
        }
    }

    let fed_cfg = FedConfig {
        num_rounds: fed.num_rounds,
        devices_per_round: fed.devices_per_round,
        sgd: fed.sgd,
        algorithm: fed.algorithm,
        sketch,
        topk_fraction: topk,
        rng_seed: fed.rng_seed,
        rotate_sketch_seed: fed.rotate_sketch_seed,
        resync_full_model: fed.resync_full_model,
        clip_norm: fed.clip_norm,
        dp: config.dp,
    };
    fed_cfg
        .validate(spec.num_devices, n)
        .map_err(|e| config_err(format!("fed: {e}")))?;

    let dataset = match &config.data_dir {
        Some(dir) => load_csv(dir).map_err(runtime_err)?,
        None => generate_synthetic(&spec).map_err(runtime_err)?,
    };
    Ok(ResolvedExperiment {
        config,
        dataset,
        model,
        fed: fed_cfg,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    crate::fedsim::atomic_write(path, bytes).map_err(runtime_err)
}

fn diagnostics_csv(state: &ServerState) -> String {
    let mut s = String::from("round,audit_max_abs_error,recovery_rel_l2,max_replica_drift\n");
    for (t, d) in state.diagnostics.iter().enumerate() {
        let _ = writeln!(
            s,
            "{t},{},{},{}",
            d.audit_max_abs_error, d.recovery_rel_l2, d.max_replica_drift
        );
    }
    s
}

/// Runs a resolved experiment and writes its outputs into `config.output_dir`.
pub fn run_resolved(exp: &ResolvedExperiment) -> Result<RunSummary, ExperimentError> {
    let out = &exp.config.output_dir;
    fs::create_dir_all(out).map_err(|e| runtime_err(format!("{}: {e}", out.display())))?;
    let resolved = serde_json::to_string_pretty(&exp.config).expect("config serializes");
    write_atomic(&out.join(RESOLVED_CONFIG_FILE), resolved.as_bytes())?;
    if exp.config.save_data {
        save_csv(&exp.dataset, &out.join("data")).map_err(runtime_err)?;
    }

    let state = fedsim::run(&exp.fed, &exp.dataset, &exp.model).map_err(|e| match e {
        FedError::Config(m) => config_err(m),
        other => runtime_err(other),
    })?;
    fedsim::emit_metrics_csv(&state.metrics_log, &out.join(METRICS_FILE)).map_err(runtime_err)?;
    if exp.fed.algorithm == Algorithm::Sketched {
        write_atomic(
            &out.join(DIAGNOSTICS_FILE),
            diagnostics_csv(&state).as_bytes(),
        )?;
    }

    let attack = match (&exp.config.attack, &exp.fed.sketch) {
        (Some(a), Some(sk)) => {
            let report = guessing_attack_experiment(
                sk.domain_size,
                sk.rows,
                sk.width,
                a.trials,
                a.seed,
                Adversary::Seedless,
            )
            .map_err(runtime_err)?;
            let text = format!("{}\n{}\n", AttackReport::CSV_HEADER, report.to_csv_line());
            write_atomic(&out.join(ATTACK_REPORT_FILE), text.as_bytes())?;
            Some(report)
        }
        _ => None,
    };

    let last = state.metrics_log.last();
    Ok(RunSummary {
        output_dir: out.clone(),
        rounds: state.metrics_log.len(),
        final_accuracy: last.map(|m| m.test_accuracy),
        total_bytes: last.map_or(0, |m| m.cumulative_bytes),
        attack,
    })
}

pub fn run_file(config_path: &Path, ov: &Overrides) -> Result<RunSummary, ExperimentError> {
    run_resolved(&resolve_file(config_path, ov)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ratio: f64,
    pub final_accuracy: f64,
    pub total_bytes: u64,
}

/// Runs the config once per compression ratio into `<out>/ratio_<r>/` and
/// writes `<out>/sweep.csv`. Ratio 1 is the dense (vanilla) baseline; other
/// ratios run the sketched algorithm. Ratios run sequentially and the first
/// failure aborts the sweep.
pub fn sweep_file(
    config_path: &Path,
    ratios: &[f64],
    ov: &Overrides,
) -> Result<Vec<SweepRow>, ExperimentError> {
    if ratios.is_empty() {
        return Err(config_err("sweep needs at least one compression ratio"));
    }
    if let Some(r) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(config_err(format!(
            "compression ratio must be positive, got {r}"
        )));
    }
    if ov.compression.is_some() || ov.algorithm.is_some() {
        return Err(config_err(
            "sweep sets the algorithm and compression per ratio",
        ));
    }
    let text = fs::read_to_string(config_path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", config_path.display())))?;
    let root = match &ov.output_dir {
        Some(dir) => dir.clone(),
        None => {
            let mut doc: Value = serde_json::from_str(&text)
                .map_err(|e| config_err(format!("invalid JSON: {e}")))?;
            apply_overrides(&mut doc, ov)?;
            doc.get("output_dir")
                .and_then(Value::as_str)
                .map_or_else(default_output_dir, PathBuf::from)
        }
    };

    // Every ratio is resolved before the first one runs.
    let mut runs = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let mut run_ov = ov.clone();
        run_ov.output_dir = Some(root.join(format!("ratio_{ratio}")));
        // Applied after any user overrides so the sweep owns these fields.
        let (algorithm, compression) = if ratio == 1.0 {
            ("vanilla", "null".to_string())
        } else {
            ("sketched", ratio.to_string())
        };
        run_ov.dotted.extend([
            ("fed.sketch".to_string(), "null".to_string()),
            ("fed.compression".to_string(), compression),
            ("fed.algorithm".to_string(), algorithm.to_string()),
        ]);
        runs.push((ratio, resolve(&text, &run_ov)?));
    }

    let mut rows = Vec::with_capacity(runs.len());
    for (ratio, exp) in &runs {
        let summary = run_resolved(exp)?;
        rows.push(SweepRow {
            ratio: *ratio,
            final_accuracy: summary.final_accuracy.unwrap_or(f64::NAN),
            total_bytes: summary.total_bytes,
        });
    }

    let mut csv = String::from("ratio,final_accuracy,total_bytes\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.ratio, r.final_accuracy, r.total_bytes);
    }
    fs::create_dir_all(&root).map_err(|e| runtime_err(format!("{}: {e}", root.display())))?;
    write_atomic(&root.join(SWEEP_FILE), csv.as_bytes())?;
    Ok(rows)
}

/// Splits `--a.b value` pairs (flags whose name contains a dot) out of an
/// argument list; returns the remaining arguments and the pairs.
pub fn split_dotted_args<I: IntoIterator<Item = String>>(
    args: I,
) -> Result<(Vec<String>, DottedPairs), ExperimentError> {
    let mut rest = Vec::new();
    let mut dotted = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--") {
            Some(name) if name.contains('.') && !name.starts_with('.') => {
                if let Some((k, v)) = name.split_once('=') {
                    dotted.push((k.to_string(), v.to_string()));
                } else {
                    let v = it
                        .next()
                        .ok_or_else(|| config_err(format!("--{name} needs a value")))?;
                    dotted.push((name.to_string(), v));
                }
            }
            _ => rest.push(arg),
        }
    }
    Ok((rest, dotted))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "data": {"num_devices": 6, "samples_mean": 20, "samples_stdev": 5, "feature_dim": 4,
                 "heterogeneity_alpha": 0.5, "heterogeneity_beta": 0.5, "label_noise": 0.0,
                 "test_fraction": 0.2, "seed": 3},
        "model": {"kind": "linear"},
        "fed": {"num_rounds": 3, "devices_per_round": 2, "algorithm": "vanilla", "rng_seed": 5,
                "sgd": {"learning_rate": 0.01, "batch_size": 5, "local_epochs": 1, "rng_seed": 0}}
    }"#;

    #[test]
    fn resolves_defaults() {
        let r = resolve(BASE, &Overrides::default()).unwrap();
        assert_eq!(r.fed.topk_fraction, 1.0);
        assert_eq!(r.config.fed.topk_fraction, Some(1.0));
        assert_eq!(r.dataset.shards.len(), 6);
        assert_eq!(r.config.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn compression_flag_resolves_sketch() {
        let ov = Overrides {
            compression: Some(2.0),
            ..Overrides::default()
        };
        let r = resolve(BASE, &ov).unwrap();
        assert_eq!(r.fed.algorithm, Algorithm::Sketched);
        let sk = r.fed.sketch.unwrap();
        assert_eq!((sk.rows, sk.width, sk.domain_size), (5, 1, 5));
        assert_eq!(r.config.fed.compression, None);
        assert_eq!(r.config.fed.sketch.unwrap().width, 1);
    }

    #[test]
    fn errors_name_fields() {
        let msg = |ov: Overrides| resolve(BASE, &ov).unwrap_err().to_string();
        let dotted = |k: &str, v: &str| Overrides {
            dotted: vec![(k.into(), v.into())],
            ..Overrides::default()
        };
        assert!(msg(dotted("fed.devices_per_round", "7")).contains("devices_per_round"));
        assert!(msg(dotted("fed.bogus", "1")).contains("bogus"));
        assert!(msg(dotted("data.samples_mean", "0")).contains("samples_mean"));
        assert!(msg(dotted("fed.topk_fraction", "1.5")).contains("topk_fraction"));
        let both = Overrides {
            compression: Some(10.0),
            dotted: vec![(
                "fed.sketch".into(),
                r#"{"rows":5,"width":3,"seed":1}"#.into(),
            )],
            ..Overrides::default()
        };
        assert!(msg(both).contains("mutually exclusive"));
        let vanilla_compressed = Overrides {
            compression: Some(10.0),
            algorithm: Some(Algorithm::Vanilla),
            ..Overrides::default()
        };
        assert_eq!(
            resolve(BASE, &vanilla_compressed).unwrap_err().exit_code(),
            1
        );
        assert!(msg(dotted("model", r#"{"kind":"mlp","hidden":4}"#)).contains("multiclass"));
    }

    #[test]
    fn seed_flag_sets_both_seeds() {
        let ov = Overrides {
            seed: Some(99),
            ..Overrides::default()
        };
        let r = resolve(BASE, &ov).unwrap();
        assert_eq!(r.fed.rng_seed, 99);
        assert_eq!(r.dataset.spec.seed, 99);
    }

    #[test]
    fn dotted_args_are_split() {
        let args = [
            "--config",
            "c.json",
            "--fed.devices_per_round",
            "10",
            "--out",
            "x",
            "--data.seed=4",
        ]
        .map(String::from);
        let (rest, dotted) = split_dotted_args(args).unwrap();
        assert_eq!(rest, vec!["--config", "c.json", "--out", "x"]);
        assert_eq!(
            dotted,
            vec![
                ("fed.devices_per_round".to_string(), "10".to_string()),
                ("data.seed".to_string(), "4".to_string())
            ]
        );
        assert!(split_dotted_args(["--fed.x".to_string()]).is_err());
    }

    #[test]
    fn override_values_parse_as_json_or_string() {
        assert_eq!(parse_override_value("10"), Value::from(10));
        assert_eq!(parse_override_value("true"), Value::Bool(true));
        assert_eq!(
            parse_override_value("sketched"),
            Value::String("sketched".into())
        );
    }
}
