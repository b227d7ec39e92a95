//! Logistic regression over averaged word embeddings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::sigmoid;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub trained_on: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrConfig {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Initial weights are uniform in `[-init_scale, init_scale)`; the
    /// default 0 starts from all zeros and makes `seed` irrelevant.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            l2: 1e-4,
            epochs: 500,
            lr: 0.5,
            init_scale: 0.0,
            seed: 1,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn check_features(features: &[(Vec<f64>, u8)]) -> Result<usize> {
    let dim = features.first().ok_or(Error::EmptyInput)?.0.len();
    for (x, y) in features {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        if *y > 1 {
            return Err(Error::InvalidConfig(format!("label {y} is not 0 or 1")));
        }
    }
    Ok(dim)
}

/// Mean cross-entropy plus `l2 / 2 * |w|^2`; the bias is not penalised.
pub fn lr_objective(weights: &[f64], bias: f64, features: &[(Vec<f64>, u8)], l2: f64) -> f64 {
    let n = features.len() as f64;
    let data: f64 = features
        .iter()
        .map(|(x, y)| {
            let z = dot(weights, x) + bias;
            softplus(z) - f64::from(*y) * z
        })
        .sum();
    data / n + 0.5 * l2 * dot(weights, weights)
}

/// Gradient of [`lr_objective`] as (d/dw, d/db).
pub fn lr_gradient(
    weights: &[f64],
    bias: f64,
    features: &[(Vec<f64>, u8)],
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut gb = 0.0;
    for (x, y) in features {
        let r = (sigmoid(dot(weights, x) + bias) - f64::from(*y)) / n;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    (gw, gb)
}

/// Full-batch gradient descent on [`lr_objective`].
pub fn lr_train(features: &[(Vec<f64>, u8)], cfg: &LrConfig, trained_on: &str) -> Result<LogRegModel> {
    let dim = check_features(features)?;
    if !(features.iter().any(|(_, y)| *y == 0) && features.iter().any(|(_, y)| *y == 1)) {
        return Err(Error::DegenerateLabels);
    }
    if !(cfg.l2 >= 0.0 && cfg.lr >= 0.0 && cfg.init_scale >= 0.0) {
        return Err(Error::InvalidConfig("l2, lr and init_scale must be >= 0".into()));
    }
    let mut weights = vec![0.0; dim];
    if cfg.init_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for w in &mut weights {
            *w = rng.gen_range(-cfg.init_scale..cfg.init_scale);
        }
    }
    let mut bias = 0.0;
    for _ in 0..cfg.epochs {
        let (gw, gb) = lr_gradient(&weights, bias, features, cfg.l2);
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= cfg.lr * g;
        }
        bias -= cfg.lr * gb;
    }
    Ok(LogRegModel {
        weights,
        bias,
        trained_on: trained_on.to_string(),
    })
}

/// `sigmoid(w . x + b)`.
pub fn lr_predict(model: &LogRegModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            actual: x.len(),
        });
    }
    Ok(sigmoid(dot(&model.weights, x) + model.bias))
}
