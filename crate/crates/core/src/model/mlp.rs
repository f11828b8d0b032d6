// SPDX-License-Identifier: Apache-2.0

use rand_distr::{Distribution, Normal};

use super::{check_batch, Example, Model, ModelError, ParamVector};
use crate::rng;

/// Two-layer perceptron: `input → hidden (ReLU) → classes (softmax)` trained
/// with cross-entropy.
///
/// Flat layout: `W1` (hidden × input, row-major), `b1`, `W2` (classes ×
/// hidden, row-major), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input: usize,
    hidden: usize,
    classes: usize,
}

/// Unflattened MLP parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpParams {
    pub fn flatten(&self) -> ParamVector {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
            .collect()
    }
}

struct Offsets {
    b1: usize,
    w2: usize,
    b2: usize,
    end: usize,
}

impl MlpModel {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Result<Self, ModelError> {
        if input == 0 || hidden == 0 {
            return Err(ModelError::Input("mlp layers must be nonempty".into()));
        }
        if classes < 2 {
            return Err(ModelError::Input(format!(
                "mlp needs at least 2 classes, got {classes}"
            )));
        }
        Ok(Self {
            input,
            hidden,
            classes,
        })
    }

    pub fn layer_dims(&self) -> [usize; 3] {
        [self.input, self.hidden, self.classes]
    }

    fn offsets(&self) -> Offsets {
        let b1 = self.input * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden * self.classes;
        Offsets {
            b1,
            w2,
            b2,
            end: b2 + self.classes,
        }
    }

    pub fn unflatten(&self, params: &[f64]) -> Result<MlpParams, ModelError> {
        let o = self.offsets();
        if params.len() != o.end {
            return Err(ModelError::DimMismatch {
                expected: o.end,
                got: params.len(),
            });
        }
        Ok(MlpParams {
            w1: params[..o.b1].to_vec(),
            b1: params[o.b1..o.w2].to_vec(),
            w2: params[o.w2..o.b2].to_vec(),
            b2: params[o.b2..].to_vec(),
        })
    }

    /// Hidden pre-activations and output logits for one input.
    fn forward(&self, params: &[f64], x: &[f64], pre: &mut [f64], logits: &mut [f64]) {
        let o = self.offsets();
        let (w1, b1) = (&params[..o.b1], &params[o.b1..o.w2]);
        let (w2, b2) = (&params[o.w2..o.b2], &params[o.b2..o.end]);
        for h in 0..self.hidden {
            let row = &w1[h * self.input..(h + 1) * self.input];
            pre[h] = b1[h] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        for c in 0..self.classes {
            let row = &w2[c * self.hidden..(c + 1) * self.hidden];
            logits[c] = b2[c]
                + row
                    .iter()
                    .zip(pre.iter())
                    .map(|(a, &p)| a * p.max(0.0))
                    .sum::<f64>();
        }
    }

    fn class_of(&self, label: f64) -> Result<usize, ModelError> {
        if label.fract() != 0.0 || label < 0.0 || label >= self.classes as f64 {
            return Err(ModelError::Input(format!(
                "label {label} is not a class index in [0, {})",
                self.classes
            )));
        }
        Ok(label as usize)
    }
}

/// Numerically stable `log Σ exp(z)`.
fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl Model for MlpModel {
    fn input_dim(&self) -> usize {
        self.input
    }

    fn num_params(&self) -> usize {
        self.offsets().end
    }

    /// He-normal weights, zero biases.
    fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = rng::rng_from(seed, &[rng::tag::INIT]);
        let o = self.offsets();
        let n1 = Normal::new(0.0, (2.0 / self.input as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, (2.0 / self.hidden as f64).sqrt()).unwrap();
        let mut p = ParamVector::zeros(o.end);
        for v in &mut p[..o.b1] {
            *v = n1.sample(&mut rng);
        }
        for v in &mut p[o.w2..o.b2] {
            *v = n2.sample(&mut rng);
        }
        p
    }

    fn loss(&self, params: &[f64], batch: &[Example]) -> Result<f64, ModelError> {
        check_batch(params, self.num_params(), batch, self.input)?;
        let mut pre = vec![0.0; self.hidden];
        let mut logits = vec![0.0; self.classes];
        let mut total = 0.0;
        for ex in batch {
            let y = self.class_of(ex.label)?;
            self.forward(params, &ex.features, &mut pre, &mut logits);
            total += log_sum_exp(&logits) - logits[y];
        }
        Ok(total / batch.len() as f64)
    }

    fn gradient(&self, params: &[f64], batch: &[Example]) -> Result<ParamVector, ModelError> {
        check_batch(params, self.num_params(), batch, self.input)?;
        let o = self.offsets();
        let w2 = &params[o.w2..o.b2];
        let mut grad = ParamVector::zeros(o.end);
        let mut pre = vec![0.0; self.hidden];
        let mut logits = vec![0.0; self.classes];
        let mut dhidden = vec![0.0; self.hidden];
        let inv = 1.0 / batch.len() as f64;

        for ex in batch {
            let y = self.class_of(ex.label)?;
            self.forward(params, &ex.features, &mut pre, &mut logits);
            let lse = log_sum_exp(&logits);

            dhidden.iter_mut().for_each(|d| *d = 0.0);
            for c in 0..self.classes {
                let mut dz = (logits[c] - lse).exp();
                if c == y {
                    dz -= 1.0;
                }
                dz *= inv;
                grad[o.b2 + c] += dz;
                let row = c * self.hidden;
                for h in 0..self.hidden {
                    grad[o.w2 + row + h] += dz * pre[h].max(0.0);
                    dhidden[h] += dz * w2[row + h];
                }
            }
            for h in 0..self.hidden {
                if pre[h] <= 0.0 {
                    continue;
                }
                let d = dhidden[h];
                grad[o.b1 + h] += d;
                let row = h * self.input;
                for (g, x) in grad[row..row + self.input].iter_mut().zip(&ex.features) {
                    *g += d * x;
                }
            }
        }
        Ok(grad)
    }

    /// Arg-max class; ties go to the lower class index.
    fn predict(&self, params: &[f64], features: &[f64]) -> f64 {
        let mut pre = vec![0.0; self.hidden];
        let mut logits = vec![0.0; self.classes];
        self.forward(params, features, &mut pre, &mut logits);
        let mut best = 0;
        for c in 1..self.classes {
            if logits[c] > logits[best] {
                best = c;
            }
        }
        best as f64
    }
}
