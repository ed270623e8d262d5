//! L2-regularized logistic regression on z-scored features, trained by
//! full-batch gradient descent with step halving.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_classes, sigmoid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    /// Recorded for reproducibility; training starts from zero weights and
    /// draws no random numbers.
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-4,
            seed: 42,
        }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.iterations == 0 || !(self.l2 > 0.0) {
            return Err(Error::InvalidConfig(
                "logistic regression learning_rate, iterations and l2 must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub config: LogRegConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Regularized training loss before the first step and after each.
    pub loss_trace: Vec<f64>,
}

/// Per-column mean and standard deviation; zero deviations become one.
pub fn standardization(x: ArrayView2<'_, f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let scale = x
        .axis_iter(Axis(1))
        .zip(&mean)
        .map(|(col, &mu)| {
            let var = col.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

pub fn standardize(x: ArrayView2<'_, f64>, mean: &[f64], scale: &[f64]) -> Array2<f64> {
    let mut z = x.to_owned();
    for mut row in z.rows_mut() {
        for ((v, &mu), &sd) in row.iter_mut().zip(mean).zip(scale) {
            *v = (*v - mu) / sd;
        }
    }
    z
}

/// Mean log loss plus `l2 / 2 * ‖w‖²` (bias unpenalized), with its gradient
/// `(dw, db)`.
pub fn loss_and_gradient(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    weights: ArrayView1<'_, f64>,
    bias: f64,
    l2: f64,
) -> (f64, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let mut grad = Array1::<f64>::zeros(weights.len());
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (row, &label) in x.rows().into_iter().zip(y) {
        let z = row.dot(&weights) + bias;
        let t = f64::from(label);
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        grad.scaled_add(r, &row);
        grad_b += r;
    }
    loss /= n;
    grad /= n;
    grad_b /= n;
    loss += 0.5 * l2 * weights.dot(&weights);
    grad.scaled_add(l2, &weights);
    (loss, grad, grad_b)
}

fn loss_only(x: ArrayView2<'_, f64>, y: &[u8], weights: ArrayView1<'_, f64>, bias: f64, l2: f64) -> f64 {
    let n = x.nrows() as f64;
    let data: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = row.dot(&weights) + bias;
            softplus(z) - f64::from(label) * z
        })
        .sum();
    data / n + 0.5 * l2 * weights.dot(&weights)
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], cfg: &LogRegConfig) -> Result<LogRegModel> {
    cfg.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: x.nrows(),
        });
    }
    check_classes(y)?;

    let (mean, scale) = standardization(x);
    let z = standardize(x, &mean, &scale);
    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut b = 0.0;
    let mut step = cfg.learning_rate;
    let mut trace = Vec::with_capacity(cfg.iterations + 1);

    let (mut loss, mut grad, mut grad_b) = loss_and_gradient(z.view(), y, w.view(), b, cfg.l2);
    trace.push(loss);
    for _ in 0..cfg.iterations {
        let mut accepted = false;
        while step > f64::EPSILON * cfg.learning_rate {
            let cand_w = &w - &(&grad * step);
            let cand_b = b - step * grad_b;
            let cand_loss = loss_only(z.view(), y, cand_w.view(), cand_b, cfg.l2);
            if cand_loss <= loss {
                w = cand_w;
                b = cand_b;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            trace.push(loss);
            continue;
        }
        (loss, grad, grad_b) = loss_and_gradient(z.view(), y, w.view(), b, cfg.l2);
        trace.push(loss);
    }

    Ok(LogRegModel {
        config: *cfg,
        weights: w.to_vec(),
        bias: b,
        mean,
        scale,
        loss_trace: trace,
    })
}

impl LogRegModel {
    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, row: ArrayView1<'_, f64>) -> f64 {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((&v, &mu), &sd), &w)| w * (v - mu) / sd)
            .sum::<f64>()
            + self.bias
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| sigmoid(self.decision(r))).collect()
    }
}
