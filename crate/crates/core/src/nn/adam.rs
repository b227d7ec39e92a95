//! Adam with bias correction.
//!
//! ```text
//! m <- b1 m + (1 - b1) g
//! v <- b2 v + (1 - b2) g^2
//! p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//! ```

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub(crate) fn begin_step(&mut self) {
        self.t += 1;
    }

    pub(crate) fn scalars(&self, cfg: &AdamConfig) -> StepScalars {
        let t = self.t as i32;
        StepScalars {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            correction1: 1.0 - cfg.beta1.powi(t),
            correction2: 1.0 - cfg.beta2.powi(t),
        }
    }

    pub(crate) fn moments_mut(&mut self, idx: usize) -> (&mut [f64], &mut [f64]) {
        (&mut self.m[idx], &mut self.v[idx])
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepScalars {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    correction1: f64,
    correction2: f64,
}

impl StepScalars {
    pub(crate) fn update(&self, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / self.correction1;
            let v_hat = *v / self.correction2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// One Adam step over matching lists of parameter and gradient tensors.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: grads.len(),
        });
    }
    for (idx, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[idx].len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                actual: g.len(),
            });
        }
    }
    state.begin_step();
    let s = state.scalars(cfg);
    for (idx, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = state.moments_mut(idx);
        s.update(p, g, m, v);
    }
    Ok(())
}
