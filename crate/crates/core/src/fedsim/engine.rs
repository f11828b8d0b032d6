// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;

use super::{dense_payload_bytes, sample_devices, Algorithm, FedConfig, FedError, RoundMetrics};
use crate::data::FederatedDataset;
use crate::model::{delta, local_train, AnyModel, Model, ParamVector, SgdConfig};
use crate::privacy::{add_laplace_noise, clip_l2};
use crate::rng::{self, derive_seed};
use crate::sketch::CountSketch;

/// Server-side view after a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    /// Completed rounds.
    pub round: usize,
    pub global_params: ParamVector,
    pub metrics_log: Vec<RoundMetrics>,
    /// Global parameters before round 0 and after every round.
    pub history: Vec<ParamVector>,
    /// Sketched runs only; one entry per round.
    pub diagnostics: Vec<RoundDiagnostics>,
}

/// Sketch-path diagnostics, computed from quantities the server would not
/// see in a deployment (the exact mean update and the device replicas).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundDiagnostics {
    /// `max_i |query(S)[i] − Δ̄[i]|` for the round's averaged sketch `S` and
    /// the exact mean of the sketched device updates `Δ̄`.
    pub audit_max_abs_error: f64,
    /// `‖recovered − Δ̄‖₂ / ‖Δ̄‖₂`, where `recovered` is the top-fraction
    /// decode devices apply (0 when `Δ̄ = 0`).
    pub recovery_rel_l2: f64,
    /// Largest L2 distance between a device replica and the server's global
    /// model at the start of the round.
    pub max_replica_drift: f64,
}

impl ServerState {
    fn new(w0: ParamVector) -> Self {
        Self {
            round: 0,
            history: vec![w0.clone()],
            global_params: w0,
            metrics_log: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn finish_round(
        &mut self,
        model: &AnyModel,
        ds: &FederatedDataset,
        chosen: Vec<usize>,
        bytes_uplink: u64,
        bytes_downlink: u64,
    ) -> Result<(), FedError> {
        let eval = model.evaluate(&self.global_params, &ds.test_set)?;
        let prev = self.metrics_log.last().map_or(0, |m| m.cumulative_bytes);
        self.metrics_log.push(RoundMetrics {
            round: self.round,
            test_accuracy: eval.accuracy,
            test_loss: eval.loss,
            bytes_uplink,
            bytes_downlink,
            cumulative_bytes: prev + bytes_uplink + bytes_downlink,
            sampled_device_ids: chosen,
        });
        self.history.push(self.global_params.clone());
        self.round += 1;
        Ok(())
    }
}

fn round_seed(cfg: &FedConfig, t: usize) -> u64 {
    derive_seed(cfg.rng_seed, &[t as u64])
}

/// Chosen devices for round `t`, ascending.
fn choose(cfg: &FedConfig, ds: &FederatedDataset, t: usize) -> Result<Vec<usize>, FedError> {
    let mut chosen = sample_devices(&ds.shard_sizes(), cfg.devices_per_round, round_seed(cfg, t))?;
    chosen.sort_unstable();
    Ok(chosen)
}

fn device_sgd(cfg: &FedConfig, t: usize, device: usize) -> SgdConfig {
    SgdConfig {
        rng_seed: derive_seed(
            round_seed(cfg, t),
            &[rng::tag::TRAIN, cfg.sgd.rng_seed, device as u64],
        ),
        ..cfg.sgd
    }
}

fn initial_params(cfg: &FedConfig, model: &AnyModel) -> ParamVector {
    model.init_params(derive_seed(cfg.rng_seed, &[rng::tag::INIT]))
}

fn check_inputs(cfg: &FedConfig, ds: &FederatedDataset, model: &AnyModel) -> Result<(), FedError> {
    cfg.validate(ds.shards.len(), model.num_params())?;
    if model.input_dim() != ds.feature_dim() {
        return Err(FedError::Config(format!(
            "model input dimension {} does not match dataset feature_dim {}",
            model.input_dim(),
            ds.feature_dim()
        )));
    }
    Ok(())
}

/// Runs the configured algorithm.
pub fn run(
    cfg: &FedConfig,
    ds: &FederatedDataset,
    model: &AnyModel,
) -> Result<ServerState, FedError> {
    match cfg.algorithm {
        Algorithm::Vanilla => run_fedavg(cfg, ds, model),
        Algorithm::Sketched => run_fedavg_sketch(cfg, ds, model),
    }
}

/// Dense FedAvg: each round the chosen devices train from `w^t` and the server
/// sets `w^{t+1}` to the plain mean of the returned models.
pub fn run_fedavg(
    cfg: &FedConfig,
    ds: &FederatedDataset,
    model: &AnyModel,
) -> Result<ServerState, FedError> {
    if cfg.algorithm != Algorithm::Vanilla {
        return Err(FedError::Config(
            "run_fedavg requires algorithm = vanilla".into(),
        ));
    }
    check_inputs(cfg, ds, model)?;
    let n = model.num_params();
    let mut state = ServerState::new(initial_params(cfg, model));

    for t in 0..cfg.num_rounds {
        let chosen = choose(cfg, ds, t)?;
        let k = chosen.len() as u64;
        let start = &state.global_params;
        let locals: Vec<ParamVector> = chosen
            .par_iter()
            .map(|&d| local_train(model, start, &ds.shards[d].examples, &device_sgd(cfg, t, d)))
            .collect::<Result<_, _>>()?;

        state.global_params = average_params(&locals)?;

        let bytes = k * dense_payload_bytes(n);
        state.finish_round(model, ds, chosen, bytes, bytes)?;
    }
    Ok(state)
}

/// `(1/K)·Σ_k w_k`, summing in slice order.
pub fn average_params(models: &[ParamVector]) -> Result<ParamVector, FedError> {
    let Some(first) = models.first() else {
        return Err(FedError::Input(
            "cannot average an empty list of models".into(),
        ));
    };
    let mut sum = ParamVector::zeros(first.len());
    for w in models {
        sum.axpy(1.0, w)?;
    }
    sum.scale(1.0 / models.len() as f64);
    Ok(sum)
}

/// `(1/K)·Σ sketches`, folding in slice order.
pub fn aggregate_sketches(sketches: &[CountSketch], k: usize) -> Result<CountSketch, FedError> {
    let Some((first, rest)) = sketches.split_first() else {
        return Err(FedError::Input(
            "cannot aggregate an empty list of sketches".into(),
        ));
    };
    if sketches.len() != k {
        return Err(FedError::Input(format!(
            "expected {k} sketches, got {}",
            sketches.len()
        )));
    }
    let mut acc = first.clone();
    for s in rest {
        acc.merge_from(s)?;
    }
    acc.scale_in_place(1.0 / k as f64)?;
    Ok(acc)
}

struct DeviceUpdate {
    sketch: CountSketch,
    sketched_delta: ParamVector,
}

/// Sketched FedAvg.
///
/// A device holds a replica `w_k` of the global model. On its first selection
/// it receives `w^0` densely. In every round `t > 0` each chosen device
/// receives the averaged sketch `S(Δw^t)` from round `t − 1`, decodes it with
/// [`CountSketch::top_fraction`], and adds the result to its replica. It then
/// trains from the replica and uploads a sketch of the difference. Devices
/// that miss a round never see that round's update, so replicas can drift from
/// the server's model; `resync_full_model` replaces the sketched download with
/// the dense global model.
///
/// All sketches of a round share one hash seed; see
/// [`FedConfig::round_sketch_config`].
///
/// The server's model is `w^0` plus every decoded round update; it is what
/// the metrics evaluate.
pub fn run_fedavg_sketch(
    cfg: &FedConfig,
    ds: &FederatedDataset,
    model: &AnyModel,
) -> Result<ServerState, FedError> {
    if cfg.algorithm != Algorithm::Sketched {
        return Err(FedError::Config(
            "run_fedavg_sketch requires algorithm = sketched".into(),
        ));
    }
    check_inputs(cfg, ds, model)?;
    let sketch_cfg = cfg.sketch.expect("validated");
    let n = model.num_params();
    let dense = dense_payload_bytes(n);
    let payload = sketch_cfg.payload_bytes() as u64;

    let w0 = initial_params(cfg, model);
    let mut state = ServerState::new(w0.clone());
    let mut replicas: Vec<Option<ParamVector>> = vec![None; ds.shards.len()];
    // Decoded S(Δw^t) from the previous round.
    let mut pending: Option<ParamVector> = None;

    for t in 0..cfg.num_rounds {
        let chosen = choose(cfg, ds, t)?;
        let mut downlink = 0u64;
        let mut max_drift = 0.0f64;
        for &d in &chosen {
            let replica = match replicas[d].take() {
                Some(r) => r,
                None => {
                    downlink += dense;
                    w0.clone()
                }
            };
            let replica = if cfg.resync_full_model && t > 0 {
                downlink += dense;
                state.global_params.clone()
            } else if let Some(update) = &pending {
                downlink += payload;
                replica
                    .iter()
                    .zip(update.iter())
                    .map(|(a, b)| a + b)
                    .collect()
            } else {
                replica
            };
            replicas[d] = Some(replica);
        }
        for r in replicas.iter().flatten() {
            max_drift = max_drift.max(r.distance(&state.global_params));
        }

        let updates: Vec<DeviceUpdate> = chosen
            .par_iter()
            .map(|&d| -> Result<DeviceUpdate, FedError> {
                let start = replicas[d].as_ref().expect("replica initialised above");
                let trained =
                    local_train(model, start, &ds.shards[d].examples, &device_sgd(cfg, t, d))?;
                let mut update = delta(&trained, start)?;
                if let Some(c) = cfg.clip_norm {
                    update = clip_l2(&update, c)?;
                }
                let mut sketch = CountSketch::from_vector(
                    cfg.round_sketch_config(t).expect("validated"),
                    &update,
                )?;
                if let Some(dp) = &cfg.dp {
                    let seed = derive_seed(round_seed(cfg, t), &[rng::tag::NOISE, d as u64]);
                    sketch = add_laplace_noise(&sketch, dp, seed)?;
                }
                Ok(DeviceUpdate {
                    sketch,
                    sketched_delta: update,
                })
            })
            .collect::<Result<_, _>>()?;
        let uplink = payload * chosen.len() as u64;

        let sketches: Vec<CountSketch> = updates.iter().map(|u| u.sketch.clone()).collect();
        let aggregate = aggregate_sketches(&sketches, chosen.len())?;
        let recovered = aggregate.top_fraction(cfg.topk_fraction)?;

        let mut exact_mean = ParamVector::zeros(n);
        for u in &updates {
            exact_mean.axpy(1.0, &u.sketched_delta)?;
        }
        exact_mean.scale(1.0 / chosen.len() as f64);
        let decoded = aggregate.query_vector();
        let audit = decoded
            .iter()
            .zip(exact_mean.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let norm = exact_mean.l2_norm();
        let recovery = if norm > 0.0 {
            recovered.distance(&exact_mean) / norm
        } else {
            recovered.l2_norm()
        };
        state.diagnostics.push(RoundDiagnostics {
            audit_max_abs_error: audit,
            recovery_rel_l2: recovery,
            max_replica_drift: max_drift,
        });

        state.global_params.axpy(1.0, &recovered)?;
        pending = Some(recovered);
        state.finish_round(model, ds, chosen, uplink, downlink)?;
    }
    Ok(state)
}
