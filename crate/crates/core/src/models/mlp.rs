use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::stats::{sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty on weights (not biases), added to the mean loss as `l2/2·||W||²`.
    pub l2: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![32],
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 64,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Feed-forward network with ReLU hidden layers and a logistic output.
///
/// Parameters are stored flat, layer by layer: the weight matrix
/// (`fan_out × fan_in`, row-major) followed by its bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<usize>,
    pub params: Vec<f64>,
    pub l2: f64,
    pub epochs: usize,
    pub final_loss: f64,
}

fn layer_offsets(layers: &[usize]) -> Vec<(usize, usize)> {
    let mut offs = Vec::new();
    let mut o = 0;
    for w in layers.windows(2) {
        let b = o + w[0] * w[1];
        offs.push((o, b));
        o = b + w[1];
    }
    offs
}

pub fn param_count(layers: &[usize]) -> usize {
    layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    pub fn init(layers: Vec<usize>, l2: f64, seed: u64) -> Result<Self> {
        if layers.len() < 3 {
            return Err(Error::Config("an MLP needs at least one hidden layer".into()));
        }
        if layers.iter().any(|&s| s == 0) || *layers.last().expect("non-empty") != 1 {
            return Err(Error::Config(format!("invalid layer sizes {layers:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; param_count(&layers)];
        for (w, &(o, b)) in layers.windows(2).zip(&layer_offsets(&layers)) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            for v in &mut params[o..b] {
                *v = rng.random_range(-limit..limit);
            }
        }
        Ok(MlpModel {
            layers,
            params,
            l2,
            epochs: 0,
            final_loss: f64::NAN,
        })
    }

    /// Output-layer pre-activation for one row.
    pub fn logit(&self, x: &[f64]) -> f64 {
        forward(&self.layers, &self.params, x, None)
    }

    /// Penalized mean loss over the whole matrix.
    pub fn loss(&self, matrix: &FeatureMatrix) -> f64 {
        mean_loss(&self.layers, &self.params, self.l2, matrix, &(0..matrix.n_rows()).collect::<Vec<_>>())
    }

    /// Gradient of [`MlpModel::loss`] with respect to the flat parameters.
    pub fn gradient(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        let mut g = vec![0.0; self.params.len()];
        let rows: Vec<usize> = (0..matrix.n_rows()).collect();
        accumulate_gradient(&self.layers, &self.params, self.l2, matrix, &rows, &mut g);
        g
    }
}

impl Classifier for MlpModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    fn n_inputs(&self) -> usize {
        self.layers[0]
    }
}

/// Runs the network; when `acts` is given, stores every layer's activations
/// (input first, output pre-activation last).
fn forward(layers: &[usize], params: &[f64], x: &[f64], mut acts: Option<&mut Vec<Vec<f64>>>) -> f64 {
    let offs = layer_offsets(layers);
    let mut a = x.to_vec();
    let last = offs.len() - 1;
    for (l, &(o, b)) in offs.iter().enumerate() {
        let (n_in, n_out) = (layers[l], layers[l + 1]);
        let mut z = params[b..b + n_out].to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            let w = &params[o + r * n_in..o + (r + 1) * n_in];
            *zr += w.iter().zip(&a).map(|(p, v)| p * v).sum::<f64>();
        }
        if l < last {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        if let Some(acts) = acts.as_deref_mut() {
            acts.push(std::mem::replace(&mut a, z));
        } else {
            a = z;
        }
    }
    if let Some(acts) = acts {
        acts.push(a.clone());
    }
    a[0]
}

fn weight_sq(layers: &[usize], params: &[f64]) -> f64 {
    layer_offsets(layers)
        .iter()
        .map(|&(o, b)| params[o..b].iter().map(|v| v * v).sum::<f64>())
        .sum()
}

fn mean_loss(layers: &[usize], params: &[f64], l2: f64, matrix: &FeatureMatrix, rows: &[usize]) -> f64 {
    let data: f64 = rows
        .iter()
        .map(|&i| {
            let z = forward(layers, params, matrix.row(i), None);
            softplus(z) - f64::from(matrix.label(i)) * z
        })
        .sum();
    data / rows.len() as f64 + 0.5 * l2 * weight_sq(layers, params)
}

/// Adds the gradient of the penalized mean loss over `rows` into `grad`;
/// returns the data part of the loss.
fn accumulate_gradient(
    layers: &[usize],
    params: &[f64],
    l2: f64,
    matrix: &FeatureMatrix,
    rows: &[usize],
    grad: &mut [f64],
) -> f64 {
    let offs = layer_offsets(layers);
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut acts = Vec::with_capacity(layers.len());
    for &i in rows {
        acts.clear();
        let z = forward(layers, params, matrix.row(i), Some(&mut acts));
        let y = f64::from(matrix.label(i));
        loss += softplus(z) - y * z;
        let mut delta = vec![(sigmoid(z) - y) * scale];
        for l in (0..offs.len()).rev() {
            let (o, b) = offs[l];
            let (n_in, n_out) = (layers[l], layers[l + 1]);
            let input = &acts[l];
            for r in 0..n_out {
                grad[b + r] += delta[r];
                let row = &mut grad[o + r * n_in..o + (r + 1) * n_in];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += delta[r] * v;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; n_in];
                for (r, d) in delta.iter().enumerate() {
                    let w = &params[o + r * n_in..o + (r + 1) * n_in];
                    for (nx, wv) in next.iter_mut().zip(w) {
                        *nx += d * wv;
                    }
                }
                // ReLU derivative: zero where the stored activation is zero.
                for (nx, a) in next.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *nx = 0.0;
                    }
                }
                delta = next;
            }
        }
    }
    if l2 > 0.0 {
        for &(o, b) in &offs {
            for k in o..b {
                grad[k] += l2 * params[k];
            }
        }
    }
    loss * scale
}

/// Mini-batch training with Adam updates.
pub fn train_mlp(matrix: &FeatureMatrix, config: &MlpConfig) -> Result<MlpModel> {
    if config.hidden.is_empty() {
        return Err(Error::Config("an MLP needs at least one hidden layer".into()));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::Config("batch size, learning rate and l2 must be positive".into()));
    }
    if matrix.n_rows() == 0 {
        return Err(Error::DegenerateFit("no training rows".into()));
    }
    let mut layers = vec![matrix.n_cols()];
    layers.extend(&config.hidden);
    layers.push(1);
    let mut model = MlpModel::init(layers, config.l2, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let n_params = model.params.len();
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..matrix.n_rows()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            epoch_loss += accumulate_gradient(&model.layers, &model.params, config.l2, matrix, batch, &mut grad)
                * batch.len() as f64;
            step += 1;
            let c1 = 1.0 - b1.powi(step);
            let c2 = 1.0 - b2.powi(step);
            for k in 0..n_params {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
                model.params[k] -= config.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
        let epoch_loss = epoch_loss / matrix.n_rows() as f64;
        if !epoch_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite loss in epoch {}; try a smaller learning rate",
                epoch + 1
            )));
        }
        model.final_loss = epoch_loss;
        model.epochs = epoch + 1;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_hidden_layers_rejected() {
        let m = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]], &[0, 1]).unwrap();
        let cfg = MlpConfig {
            hidden: vec![],
            ..MlpConfig::default()
        };
        assert!(matches!(train_mlp(&m, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn parameter_layout() {
        assert_eq!(param_count(&[5, 4, 1]), 5 * 4 + 4 + 4 + 1);
        assert_eq!(layer_offsets(&[5, 4, 1]), vec![(0, 20), (24, 28)]);
    }

    #[test]
    fn learns_xor() {
        let rows = [vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let m = FeatureMatrix::from_rows(&rows, &[0, 1, 1, 0]).unwrap();
        let cfg = MlpConfig {
            hidden: vec![8],
            learning_rate: 0.05,
            epochs: 2000,
            batch_size: 4,
            l2: 0.0,
            seed: 3,
        };
        let model = train_mlp(&m, &cfg).unwrap();
        for (i, x) in rows.iter().enumerate() {
            assert_eq!(u8::from(model.predict_row(x) >= 0.5), m.label(i));
        }
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i) / 40.0, f64::from(i % 7) / 7.0]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let m = FeatureMatrix::from_rows(&rows, &labels).unwrap();
        let cfg = MlpConfig {
            hidden: vec![4],
            epochs: 5,
            ..MlpConfig::default()
        };
        assert_eq!(train_mlp(&m, &cfg).unwrap(), train_mlp(&m, &cfg).unwrap());
    }
}
