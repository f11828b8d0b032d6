// SPDX-License-Identifier: Apache-2.0

use rand::Rng;

use super::FedError;
use crate::rng;

/// Draws `k` distinct devices, each draw proportional to the remaining
/// devices' weights (successive sampling without replacement).
///
/// Ids are returned in draw order.
pub fn sample_devices(
    weights: &[usize],
    k: usize,
    round_seed: u64,
) -> Result<Vec<usize>, FedError> {
    let n = weights.len();
    if k > n {
        return Err(FedError::Config(format!(
            "devices_per_round ({k}) exceeds the number of devices ({n})"
        )));
    }
    if weights.contains(&0) {
        return Err(FedError::Config(
            "every device weight must be at least 1".into(),
        ));
    }
    let mut rng = rng::rng_from(round_seed, &[rng::tag::SAMPLE]);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut total: u64 = weights.iter().map(|&w| w as u64).sum();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let mut target = rng.random_range(0..total);
        let mut pos = 0;
        for (p, &id) in remaining.iter().enumerate() {
            let w = weights[id] as u64;
            if target < w {
                pos = p;
                break;
            }
            target -= w;
        }
        let id = remaining.remove(pos);
        total -= weights[id] as u64;
        chosen.push(id);
    }
    Ok(chosen)
}
