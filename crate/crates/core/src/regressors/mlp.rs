//! Two-hidden-layer ReLU perceptron, 2 → h1 → h2 → 1, trained with Adam on
//! z-scored inputs and targets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{task_rng, Dataset, NormStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_widths: [usize; 2],
    pub epochs: usize,
    pub learning_rate: f64,
    /// When set, the step size follows a cosine from `learning_rate` down to
    /// this value over the epochs.
    pub final_learning_rate: Option<f64>,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_widths: [32, 32],
            epochs: 2000,
            learning_rate: 0.03,
            final_learning_rate: Some(1e-4),
            batch_size: None,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

/// Dense layer with row-major `n_out × n_in` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, weights: vec![0.0; n_in * n_out], biases: vec![0.0; n_out] }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.biases[o]);
        }
    }
}

/// The network weights without normalization or training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    /// He-normal hidden layers, Glorot-normal output layer, zero biases.
    pub fn init<R: Rng>(hidden: [usize; 2], rng: &mut R) -> Self {
        let shapes = [(2, hidden[0]), (hidden[0], hidden[1]), (hidden[1], 1)];
        let layers = shapes
            .iter()
            .enumerate()
            .map(|(k, &(n_in, n_out))| {
                let var = if k < 2 { 2.0 / n_in as f64 } else { 2.0 / (n_in + n_out) as f64 };
                let normal = Normal::new(0.0, var.sqrt()).expect("finite std");
                let mut layer = Layer::zeros(n_in, n_out);
                for w in &mut layer.weights {
                    *w = normal.sample(rng);
                }
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, x: [f64; 2]) -> f64 {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.affine(&a, &mut z);
            if k < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut a, &mut z);
        }
        a[0]
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter vector length");
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
    }

    /// Mean squared error over the batch.
    pub fn loss(&self, xs: &[[f64; 2]], ys: &[f64]) -> f64 {
        xs.iter().zip(ys).map(|(&x, &y)| (self.forward(x) - y).powi(2)).sum::<f64>() / xs.len() as f64
    }

    /// Mean squared error and its gradient in [`Network::params`] order.
    pub fn loss_and_gradient(&self, xs: &[[f64; 2]], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect();
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len() + 1];
        for (&x, &y) in xs.iter().zip(ys) {
            acts[0] = x.to_vec();
            for (k, layer) in self.layers.iter().enumerate() {
                let mut z = Vec::with_capacity(layer.n_out);
                layer.affine(&acts[k], &mut z);
                if k < last {
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                acts[k + 1] = z;
            }
            let err = acts[last + 1][0] - y;
            loss += err * err;

            let mut delta = vec![2.0 * err / n];
            for k in (0..=last).rev() {
                let layer = &self.layers[k];
                let g = &mut grads[k];
                let input = &acts[k];
                for o in 0..layer.n_out {
                    g.biases[o] += delta[o];
                    for i in 0..layer.n_in {
                        g.weights[o * layer.n_in + i] += delta[o] * input[i];
                    }
                }
                if k > 0 {
                    // input activations are post-ReLU, so a zero marks an inactive unit
                    delta = (0..layer.n_in)
                        .map(|i| {
                            if input[i] > 0.0 {
                                (0..layer.n_out).map(|o| layer.weights[o * layer.n_in + i] * delta[o]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let flat = Network { layers: grads }.params();
        (loss / n, flat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Network,
    pub stats: NormStats,
    /// Normalized training MSE, one entry per epoch.
    pub loss_curve: Vec<f64>,
    pub config: MlpConfig,
}

impl MlpModel {
    /// Normalized training inputs and targets as seen by the optimizer.
    pub fn training_batch(data: &Dataset, stats: &NormStats) -> (Vec<[f64; 2]>, Vec<f64>) {
        data.train_rows().map(|r| (stats.normalize(r.features()), stats.normalize_target(r.p))).unzip()
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], cfg: &MlpConfig, lr: f64) {
        self.step += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_epsilon);
        }
    }
}

fn validate(cfg: &MlpConfig) -> Result<()> {
    if cfg.hidden_widths.contains(&0) {
        return Err(Error::validation("hidden layer widths must be >= 1"));
    }
    if !(cfg.learning_rate > 0.0) || !cfg.learning_rate.is_finite() {
        return Err(Error::validation(format!("learning rate {} must be positive", cfg.learning_rate)));
    }
    if cfg.batch_size == Some(0) {
        return Err(Error::validation("batch size must be >= 1"));
    }
    if !(0.0..1.0).contains(&cfg.adam_beta1) || !(0.0..1.0).contains(&cfg.adam_beta2) || !(cfg.adam_epsilon > 0.0) {
        return Err(Error::validation("Adam parameters must satisfy 0 <= beta < 1 and epsilon > 0"));
    }
    Ok(())
}

pub fn train_mlp(data: &Dataset, cfg: &MlpConfig) -> Result<MlpModel> {
    validate(cfg)?;
    if data.train_indices().len() < 4 {
        return Err(Error::validation(format!(
            "MLP training needs at least 4 training rows, got {}",
            data.train_indices().len()
        )));
    }
    let stats = *data.stats();
    let (xs, ys) = MlpModel::training_batch(data, &stats);
    let mut rng = task_rng(cfg.seed, 0);
    let mut network = Network::init(cfg.hidden_widths, &mut rng);
    let mut params = network.params();
    let mut adam = Adam::new(params.len());
    let batch = cfg.batch_size.unwrap_or(xs.len()).min(xs.len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = match cfg.final_learning_rate {
            Some(end) if cfg.epochs > 1 => {
                let frac = epoch as f64 / (cfg.epochs - 1) as f64;
                end + 0.5 * (cfg.learning_rate - end) * (1.0 + (std::f64::consts::PI * frac).cos())
            }
            _ => cfg.learning_rate,
        };
        if batch < xs.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let bx: Vec<[f64; 2]> = chunk.iter().map(|&i| xs[i]).collect();
            let by: Vec<f64> = chunk.iter().map(|&i| ys[i]).collect();
            let (loss, grad) = network.loss_and_gradient(&bx, &by);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.update(&mut params, &grad, cfg, lr);
            network.set_params(&params);
        }
        loss_curve.push(epoch_loss / xs.len() as f64);
    }
    Ok(MlpModel { network, stats, loss_curve, config: cfg.clone() })
}

pub fn predict_mlp(m: &MlpModel, g: f64, t: f64) -> f64 {
    m.stats.denormalize_target(m.network.forward(m.stats.normalize([g, t])))
}
