//! Mini-batch gradient descent with momentum on the logistic loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, LabeledDataset, Network, NetworkConfig, NetworkWeights};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_iters: usize,
    pub init_std: f64,
    pub seed: u64,
    /// Stop once zero training error has held at this many consecutive
    /// epoch ends. `None` always runs `max_iters` steps.
    pub zte_window: Option<usize>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 0.01,
            momentum: 0.05,
            batch_size: 100,
            max_iters: 20_000,
            init_std: 0.025,
            seed: 0,
            zte_window: Some(3),
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig(
                "batch_size and max_iters must be positive".into(),
            ));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::InvalidConfig("init_std must be positive".into()));
        }
        if self.zte_window == Some(0) {
            return Err(Error::InvalidConfig("zte_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub network: Network,
    pub iterations: usize,
    pub epochs: usize,
    /// Whether every training sample is classified correctly at the end.
    pub zero_training_error: bool,
    pub final_loss: f64,
}

/// `ln(1 + exp(-t))`, evaluated without overflow.
pub fn logistic_loss(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `d/dt ln(1 + exp(-t)) = -1 / (1 + exp(t))`.
fn logistic_slope(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + t.exp())
    }
}

#[derive(Debug, Clone)]
pub struct LossGradient {
    pub loss: f64,
    pub grad: NetworkWeights,
}

impl Network {
    /// Mean logistic loss `ln(1 + exp(-y N(x, w)))` over `indices`.
    pub fn loss(&self, data: &LabeledDataset, indices: &[usize]) -> f64 {
        let samples = data.samples();
        let total: f64 = indices
            .iter()
            .map(|&j| {
                let s = &samples[j];
                logistic_loss(s.y as f64 * self.pre_activations(&s.x).1)
            })
            .sum();
        total / indices.len().max(1) as f64
    }

    /// Mean loss over `indices` and its gradient by backpropagation.
    pub fn loss_and_gradient(&self, data: &LabeledDataset, indices: &[usize]) -> LossGradient {
        let cfg = &self.config;
        let d = cfg.depth();
        let mut grad = NetworkWeights::zeros(cfg);
        let mut loss = 0.0;
        let samples = data.samples();
        let scale = 1.0 / indices.len().max(1) as f64;

        for &j in indices {
            let s = &samples[j];
            // hs[l] is the input to W^l.
            let mut hs: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
            let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(d);
            hs.push(s.x.clone());
            for l in 0..d {
                let w = &self.weights.matrices[l];
                let b = self.bias(l + 1);
                let h = &hs[l];
                let mut z: Vec<f64> = w
                    .rows()
                    .into_iter()
                    .map(|row| dot(row.as_slice().unwrap(), h))
                    .collect();
                if let Some(b) = b {
                    for (zi, bi) in z.iter_mut().zip(b.iter()) {
                        *zi += bi;
                    }
                }
                let sl: Vec<f64> = z.iter().map(|&v| cfg.slope(v)).collect();
                let next = z.iter().zip(&sl).map(|(zi, si)| zi * si).collect();
                slopes.push(sl);
                hs.push(next);
            }
            let mut out = dot(self.weights.output_weights(), &hs[d]);
            if let Some(b) = self.bias(d + 1) {
                out += b[0];
            }
            let y = s.y as f64;
            loss += logistic_loss(y * out);
            let g_out = y * logistic_slope(y * out) * scale;

            // Output layer.
            {
                let gw = &mut grad.matrices[d];
                for (g, h) in gw.iter_mut().zip(&hs[d]) {
                    *g += g_out * h;
                }
                if let Some(gb) = grad.biases.as_mut() {
                    gb[d][0] += g_out;
                }
            }
            let mut g_h: Vec<f64> = self.weights.output_weights().iter().map(|w| w * g_out).collect();
            for l in (0..d).rev() {
                let g_z: Vec<f64> = g_h.iter().zip(&slopes[l]).map(|(g, s)| g * s).collect();
                let w = &self.weights.matrices[l];
                let gw = &mut grad.matrices[l];
                for (i, &gz) in g_z.iter().enumerate() {
                    if gz == 0.0 {
                        continue;
                    }
                    for (g, h) in gw.row_mut(i).iter_mut().zip(&hs[l]) {
                        *g += gz * h;
                    }
                }
                if let Some(gb) = grad.biases.as_mut() {
                    for (g, gz) in gb[l].iter_mut().zip(&g_z) {
                        *g += gz;
                    }
                }
                if l > 0 {
                    let mut next = vec![0.0; w.ncols()];
                    for (i, &gz) in g_z.iter().enumerate() {
                        if gz == 0.0 {
                            continue;
                        }
                        for (n, wij) in next.iter_mut().zip(w.row(i)) {
                            *n += gz * wij;
                        }
                    }
                    g_h = next;
                }
            }
        }
        LossGradient {
            loss: loss * scale,
            grad,
        }
    }
}

/// Trains a network on `data` from a truncated-normal initialization.
///
/// Fully deterministic given `hyper.seed`: the same seed produces
/// bit-identical weights.
pub fn train_sgd(data: &LabeledDataset, cfg: &NetworkConfig, hyper: &TrainHyper) -> Result<TrainReport> {
    cfg.validate()?;
    hyper.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if data.dim() != Some(cfg.input_dim) {
        return Err(Error::DimensionMismatch {
            expected: cfg.input_dim,
            actual: data.dim().unwrap_or(0),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let weights = NetworkWeights::truncated_normal(cfg, hyper.init_std, &mut rng);
    let mut net = Network::new(cfg.clone(), weights)?;
    let mut params = net.params();
    let mut velocity = vec![0.0; params.len()];

    let m = data.len();
    let batch = hyper.batch_size.min(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut epochs = 0;
    let mut streak = 0;
    let mut iterations = 0;

    while iterations < hyper.max_iters {
        if cursor + batch > m {
            epochs += 1;
            if net.zero_training_error(data)? {
                streak += 1;
                if hyper.zte_window.is_some_and(|w| streak >= w) {
                    break;
                }
            } else {
                streak = 0;
            }
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;

        let LossGradient { loss, grad } = net.loss_and_gradient(data, idx);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { iteration: iterations });
        }
        for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad.to_flat()) {
            *v = hyper.momentum * *v + g;
            *p -= hyper.learning_rate * *v;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { iteration: iterations });
        }
        net.set_params(&params)?;
        iterations += 1;
    }

    let all: Vec<usize> = (0..m).collect();
    let final_loss = net.loss(data, &all);
    let zero_training_error = net.zero_training_error(data)?;
    Ok(TrainReport {
        network: net,
        iterations,
        epochs,
        zero_training_error,
        final_loss,
    })
}
