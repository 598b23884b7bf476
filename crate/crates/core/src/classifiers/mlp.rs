//! Feed-forward trending classifier: input → 128 ReLU → 128 ReLU → logistic output,
//! trained on mean binary cross-entropy with Adam.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_columns, check_labels, Scorer, TrainConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::features::{ColumnStats, FeatureMatrix};

/// Fully connected layer; `weights` is `fan_in × fan_out`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit));
        Self { weights, bias: Array1::zeros(fan_out) }
    }

    fn zeros_like(&self) -> Self {
        Self { weights: Array2::zeros(self.weights.raw_dim()), bias: Array1::zeros(self.bias.len()) }
    }

    fn affine(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln σ(z) + (1-y) ln(1-σ(z))]` evaluated without overflow.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// The three dense layers; gradients share the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Dense>,
}

impl Network {
    /// Glorot-uniform weights and zero biases.
    pub fn glorot<R: Rng + ?Sized>(n_inputs: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            layers: vec![
                Dense::glorot(n_inputs, hidden, rng),
                Dense::glorot(hidden, hidden, rng),
                Dense::glorot(hidden, 1, rng),
            ],
        }
    }

    fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(Dense::zeros_like).collect() }
    }

    pub fn logits(&self, x: &Array2<f64>) -> Array1<f64> {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.affine(&a);
            if l < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        a.column(0).to_owned()
    }

    /// Mean binary cross-entropy of the logistic output.
    pub fn loss(&self, x: &Array2<f64>, y: &[f64]) -> f64 {
        let z = self.logits(x);
        z.iter().zip(y).map(|(&z, &y)| bce_with_logit(z, y)).sum::<f64>() / y.len() as f64
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: &Array2<f64>, y: &[f64]) -> (f64, Network) {
        let b = y.len() as f64;
        let mut inputs = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(inputs.last().expect("non-empty"));
            if l < last {
                inputs.push(z.mapv(|v| v.max(0.0)));
            }
            pre.push(z);
        }
        let z_out = pre[last].column(0);
        let loss = z_out.iter().zip(y).map(|(&z, &y)| bce_with_logit(z, y)).sum::<f64>() / b;

        let mut grads = self.zeros_like();
        let mut delta = Array2::from_shape_fn((y.len(), 1), |(r, _)| (sigmoid(z_out[r]) - y[r]) / b);
        for l in (0..=last).rev() {
            grads.layers[l].weights = inputs[l].t().dot(&delta);
            grads.layers[l].bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut up = delta.dot(&self.layers[l].weights.t());
                Zip::from(&mut up).and(&pre[l - 1]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = up;
            }
        }
        (loss, grads)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|d| d.weights.len() + d.bias.len()).sum()
    }

    /// Parameters in layer order, each layer's weights row-major then its bias.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|d| d.weights.iter().chain(d.bias.iter()).copied())
            .collect()
    }

    /// Sets the parameter at `index` of the [`Network::flat`] ordering.
    pub fn set(&mut self, mut index: usize, value: f64) {
        for d in &mut self.layers {
            let nw = d.weights.len();
            if index < nw {
                let cols = d.weights.ncols();
                d.weights[[index / cols, index % cols]] = value;
                return;
            }
            index -= nw;
            if index < d.bias.len() {
                d.bias[index] = value;
                return;
            }
            index -= d.bias.len();
        }
        panic!("parameter index out of range");
    }
}

struct Adam {
    m: Network,
    v: Network,
    t: i32,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(net: &Network, cfg: &TrainConfig) -> Self {
        Self {
            m: net.zeros_like(),
            v: net.zeros_like(),
            t: 0,
            alpha: cfg.adam_alpha,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &Network) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.alpha;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((p, m), v), g) in net
            .layers
            .iter_mut()
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
            .zip(&grads.layers)
        {
            Zip::from(&mut p.weights).and(&mut m.weights).and(&mut v.weights).and(&g.weights).for_each(update);
            Zip::from(&mut p.bias).and(&mut m.bias).and(&mut v.bias).and(&g.bias).for_each(update);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainingMeta {
    pub epochs: usize,
    pub final_loss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub schema_version: u32,
    pub column_names: Vec<String>,
    pub normalization: ColumnStats,
    pub network: Network,
    pub training: MlpTrainingMeta,
}

impl Scorer for MlpModel {
    fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Logistic output, kept strictly inside (0, 1).
    fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        check_columns(&self.column_names, x)?;
        let z = self.network.logits(&self.normalization.apply(&x.features));
        Ok(z.iter()
            .map(|&z| sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
            .collect())
    }
}

/// Trains until the relative change in full-dataset loss between epochs drops below
/// `cfg.convergence_rel_tol`, or `cfg.max_epochs` is reached.
pub fn train_mlp(x: &FeatureMatrix, cfg: &TrainConfig) -> Result<MlpModel> {
    cfg.validate()?;
    let labels = check_labels(x)?;
    let y: Vec<f64> = labels.iter().map(|&b| f64::from(u8::from(b))).collect();
    let normalization = ColumnStats::fit(&x.features);
    let xn = normalization.apply(&x.features);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Network::glorot(x.n_cols(), cfg.hidden_units, &mut rng);
    let mut adam = Adam::new(&net, cfg);
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut prev: Option<f64> = None;
    let mut meta = MlpTrainingMeta { epochs: 0, final_loss: f64::NAN, converged: false };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = xn.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&r| y[r]).collect();
            let (_, grads) = net.loss_and_gradients(&xb, &yb);
            adam.step(&mut net, &grads);
        }
        let loss = net.loss(&xn, &y);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        meta.epochs = epoch;
        meta.final_loss = loss;
        if let Some(p) = prev {
            if (p - loss).abs() / p.abs().max(f64::MIN_POSITIVE) < cfg.convergence_rel_tol {
                meta.converged = true;
                break;
            }
        }
        prev = Some(loss);
    }

    Ok(MlpModel {
        schema_version: SCHEMA_VERSION,
        column_names: x.column_names.clone(),
        normalization,
        network: net,
        training: meta,
    })
}
