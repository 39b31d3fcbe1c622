use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::stats::{sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l1_lambda: f64,
    /// Initial step size; `None` derives it from a Lipschitz estimate.
    pub step: Option<f64>,
    pub max_epochs: usize,
    /// Relative objective change below which iteration stops.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l1_lambda: 0.0,
            step: None,
            max_epochs: 500,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub offset: f64,
    pub l1_lambda: f64,
    pub epochs: usize,
    pub step: f64,
    pub converged: bool,
}

impl LogisticModel {
    pub fn zero(p: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; p],
            offset: 0.0,
            l1_lambda: 0.0,
            epochs: 0,
            step: 0.0,
            converged: true,
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.offset + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

impl Classifier for LogisticModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    fn n_inputs(&self) -> usize {
        self.weights.len()
    }
}

/// Sum-form logistic loss (no penalty) at `(offset, weights)`.
pub fn logistic_loss(matrix: &FeatureMatrix, offset: f64, weights: &[f64]) -> f64 {
    matrix
        .rows()
        .zip(matrix.labels())
        .map(|(x, &y)| {
            let z = offset + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            softplus(z) - f64::from(y) * z
        })
        .sum()
}

fn loss_and_grad(matrix: &FeatureMatrix, offset: f64, weights: &[f64], grad: &mut [f64]) -> (f64, f64) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let mut g0 = 0.0;
    for (x, &y) in matrix.rows().zip(matrix.labels()) {
        let z = offset + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        let y = f64::from(y);
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        g0 += r;
        for (g, v) in grad.iter_mut().zip(x) {
            *g += r * v;
        }
    }
    (loss, g0)
}

/// Smallest penalty at which every feature weight is zero at the optimum.
pub fn lambda_max(matrix: &FeatureMatrix) -> f64 {
    let ybar = mean_label(matrix);
    (0..matrix.n_cols())
        .map(|j| {
            matrix
                .rows()
                .zip(matrix.labels())
                .map(|(x, &y)| (ybar - f64::from(y)) * x[j])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

fn mean_label(matrix: &FeatureMatrix) -> f64 {
    matrix.positives() as f64 / matrix.n_rows().max(1) as f64
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Upper estimate of the gradient's Lipschitz constant, `||[1 X]||² / 4`,
/// by power iteration on the Gram matrix.
fn lipschitz_estimate(matrix: &FeatureMatrix) -> f64 {
    let p = matrix.n_cols() + 1;
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut eig = 1.0;
    for _ in 0..30 {
        let mut w = vec![0.0; p];
        for x in matrix.rows() {
            let xv = v[0] + x.iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>();
            w[0] += xv;
            for (wj, xj) in w[1..].iter_mut().zip(x) {
                *wj += xv * xj;
            }
        }
        eig = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if eig == 0.0 {
            return 1.0;
        }
        v = w.iter().map(|a| a / eig).collect();
    }
    0.25 * eig * 1.05
}

pub fn train_logistic(matrix: &FeatureMatrix, config: &LogisticConfig) -> Result<LogisticModel> {
    train_logistic_traced(matrix, config).map(|(m, _)| m)
}

/// Monotone FISTA with backtracking on the L1-penalized sum-form loss.
/// Also returns the penalized objective after every epoch.
pub fn train_logistic_traced(matrix: &FeatureMatrix, config: &LogisticConfig) -> Result<(LogisticModel, Vec<f64>)> {
    if !(config.l1_lambda >= 0.0) || !config.l1_lambda.is_finite() {
        return Err(Error::Config(format!("l1_lambda must be finite and >= 0, got {}", config.l1_lambda)));
    }
    let p = matrix.n_cols();
    let lambda = config.l1_lambda;
    if matrix.n_rows() == 0 {
        return Err(Error::DegenerateFit("no training rows".into()));
    }
    let ybar = mean_label(matrix).clamp(1e-6, 1.0 - 1e-6);

    let mut step = match config.step {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::Config(format!("step must be positive, got {s}"))),
        None => 1.0 / lipschitz_estimate(matrix),
    };
    let penalty = |w: &[f64]| lambda * w.iter().map(|v| v.abs()).sum::<f64>();

    // Starting at the intercept-only optimum makes λ ≥ λ_max a fixed point.
    let mut x0 = (ybar / (1.0 - ybar)).ln();
    let mut x = vec![0.0; p];
    let mut y0 = x0;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut grad = vec![0.0; p];
    let mut obj = logistic_loss(matrix, x0, &x) + penalty(&x);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut epochs = 0;

    let mut z = vec![0.0; p];
    for _ in 0..config.max_epochs {
        epochs += 1;
        let (fy, gy0) = loss_and_grad(matrix, y0, &y, &mut grad);
        if !fy.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss at epoch {epochs}; try a smaller step")));
        }
        let mut z0;
        loop {
            z0 = y0 - step * gy0;
            for j in 0..p {
                z[j] = soft_threshold(y[j] - step * grad[j], step * lambda);
            }
            let fz = logistic_loss(matrix, z0, &z);
            let mut quad = fy + gy0 * (z0 - y0);
            let mut dist = (z0 - y0).powi(2);
            for j in 0..p {
                let d = z[j] - y[j];
                quad += grad[j] * d;
                dist += d * d;
            }
            if !fz.is_finite() || fz > quad + dist / (2.0 * step) + 1e-12 * fz.abs() {
                step *= 0.5;
                if step < 1e-30 {
                    return Err(Error::Divergence("step size underflow; try a smaller step".into()));
                }
                continue;
            }
            break;
        }
        let fz_obj = logistic_loss(matrix, z0, &z) + penalty(&z);
        let moved = (z0 - y0).abs().max(z.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        if fz_obj > obj {
            // Monotone variant: the prox point is worse, so keep the iterate
            // and restart the momentum from it.
            y0 = x0;
            y.copy_from_slice(&x);
            t = 1.0;
            trace.push(obj);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let prev_x0 = x0;
        let prev_x = x.clone();
        x0 = z0;
        x.copy_from_slice(&z);
        let b = (t - 1.0) / t_next;
        y0 = x0 + b * (x0 - prev_x0);
        for j in 0..p {
            y[j] = x[j] + b * (x[j] - prev_x[j]);
        }
        t = t_next;
        let change = obj - fz_obj;
        obj = fz_obj;
        trace.push(obj);
        if change <= config.tol * obj.abs().max(1.0) && moved <= 1e-6 && epochs > 1 {
            converged = true;
            break;
        }
    }
    Ok((
        LogisticModel {
            weights: x,
            offset: x0,
            l1_lambda: lambda,
            epochs,
            step,
            converged,
        },
        trace,
    ))
}
