//! A single-direction LSTM layer with backpropagation through time.
//!
//! Gate pre-activations are stacked in the order input, forget, output,
//! candidate:
//!
//! ```text
//! a   = W x_t + U h_{t-1} + b          (4H)
//! i   = sigmoid(a_i)   f = sigmoid(a_f)   o = sigmoid(a_o)   g = tanh(a_g)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```

use rand::Rng;

use super::tensor::{add_slices, sigmoid, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

/// Weights of one LSTM direction, gates stacked as [`Gate`] orders them.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H x input_size`
    pub w: Matrix,
    /// `4H x H`
    pub u: Matrix,
    /// `4H`
    pub b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(4 * hidden_size, input_size),
            u: Matrix::zeros(4 * hidden_size, hidden_size),
            b: vec![0.0; 4 * hidden_size],
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate at 1.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut p = LstmParams {
            w: Matrix::glorot(4 * hidden_size, input_size, rng),
            u: Matrix::glorot(4 * hidden_size, hidden_size, rng),
            b: vec![0.0; 4 * hidden_size],
        };
        p.gate_bias_mut(Gate::Forget).fill(1.0);
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    fn gate_range(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden_size();
        gate as usize * h..(gate as usize + 1) * h
    }

    /// `W_g`, `H x input_size`, row-major.
    pub fn gate_input_weights(&self, gate: Gate) -> &[f64] {
        let r = self.gate_range(gate);
        &self.w.as_slice()[r.start * self.input_size()..r.end * self.input_size()]
    }

    /// `U_g`, `H x H`, row-major.
    pub fn gate_recurrent_weights(&self, gate: Gate) -> &[f64] {
        let r = self.gate_range(gate);
        let h = self.hidden_size();
        &self.u.as_slice()[r.start * h..r.end * h]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        &self.b[self.gate_range(gate)]
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let r = self.gate_range(gate);
        &mut self.b[r]
    }

    fn check(&self) -> Result<()> {
        let four_h = 4 * self.hidden_size();
        if self.w.rows() != four_h || self.u.rows() != four_h || self.b.len() != four_h {
            return Err(Error::DimensionMismatch {
                expected: four_h,
                actual: self.w.rows().min(self.u.rows()).min(self.b.len()),
            });
        }
        Ok(())
    }

    pub(crate) fn add_assign(&mut self, other: &LstmParams) {
        self.w.add_assign(&other.w);
        self.u.add_assign(&other.u);
        add_slices(&mut self.b, &other.b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

/// Everything one time step needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// Activated gates `[i, f, o, g]`, `4H`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl StepCache {
    pub(crate) fn h(&self) -> &[f64] {
        &self.h
    }
}

fn step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> StepCache {
    let hs = p.hidden_size();
    let mut a = p.b.clone();
    p.w.matvec_acc(x, &mut a);
    p.u.matvec_acc(h_prev, &mut a);
    for (k, v) in a.iter_mut().enumerate() {
        *v = if k < 3 * hs { sigmoid(*v) } else { v.tanh() };
    }
    let (i, rest) = a.split_at(hs);
    let (f, rest) = rest.split_at(hs);
    let (o, g) = rest.split_at(hs);
    let c: Vec<f64> = (0..hs).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..hs).map(|k| o[k] * tanh_c[k]).collect();
    StepCache {
        gates: a,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM time step.
pub fn lstm_cell_forward(x: &[f64], prev: &LstmState, p: &LstmParams) -> Result<LstmState> {
    p.check()?;
    let hs = p.hidden_size();
    if x.len() != p.input_size() {
        return Err(Error::DimensionMismatch {
            expected: p.input_size(),
            actual: x.len(),
        });
    }
    if prev.h.len() != hs || prev.c.len() != hs {
        return Err(Error::DimensionMismatch {
            expected: hs,
            actual: prev.h.len().max(prev.c.len()),
        });
    }
    let s = step(x, &prev.h, &prev.c, p);
    Ok(LstmState { h: s.h, c: s.c })
}

/// Runs the layer over `xs` from a zero state and keeps every step's cache.
pub(crate) fn run_sequence<'a, I>(p: &LstmParams, xs: I) -> Vec<StepCache>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let zero = vec![0.0; p.hidden_size()];
    let mut caches: Vec<StepCache> = Vec::new();
    for x in xs {
        let (h_prev, c_prev) = match caches.last() {
            Some(prev) => (prev.h.as_slice(), prev.c.as_slice()),
            None => (zero.as_slice(), zero.as_slice()),
        };
        let s = step(x, h_prev, c_prev, p);
        caches.push(s);
    }
    caches
}

/// Backpropagates `dh_last` (gradient of the loss w.r.t. the final hidden
/// state) through the whole sequence. Parameter gradients are accumulated
/// into `grads`; the returned vectors are the gradients w.r.t. each input
/// `x_t`, in the order the inputs were given.
pub(crate) fn backward_sequence(
    p: &LstmParams,
    xs: &[&[f64]],
    caches: &[StepCache],
    dh_last: &[f64],
    grads: &mut LstmParams,
    want_dx: bool,
) -> Vec<Vec<f64>> {
    let hs = p.hidden_size();
    let zero = vec![0.0; hs];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; hs];
    let mut da = vec![0.0; 4 * hs];
    let mut dxs = vec![Vec::new(); if want_dx { xs.len() } else { 0 }];

    for t in (0..caches.len()).rev() {
        let s = &caches[t];
        let (h_prev, c_prev) = if t == 0 {
            (zero.as_slice(), zero.as_slice())
        } else {
            (caches[t - 1].h.as_slice(), caches[t - 1].c.as_slice())
        };
        let (i, rest) = s.gates.split_at(hs);
        let (f, rest) = rest.split_at(hs);
        let (o, g) = rest.split_at(hs);
        for k in 0..hs {
            let d_o = dh[k] * s.tanh_c[k];
            dc[k] += dh[k] * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_i = dc[k] * g[k];
            let d_g = dc[k] * i[k];
            let d_f = dc[k] * c_prev[k];
            da[k] = d_i * i[k] * (1.0 - i[k]);
            da[hs + k] = d_f * f[k] * (1.0 - f[k]);
            da[2 * hs + k] = d_o * o[k] * (1.0 - o[k]);
            da[3 * hs + k] = d_g * (1.0 - g[k] * g[k]);
            dc[k] *= f[k];
        }
        grads.w.outer_acc(&da, xs[t]);
        grads.u.outer_acc(&da, h_prev);
        add_slices(&mut grads.b, &da);
        if want_dx {
            let mut dx = vec![0.0; p.input_size()];
            p.w.matvec_t_acc(&da, &mut dx);
            dxs[t] = dx;
        }
        dh.iter_mut().for_each(|v| *v = 0.0);
        p.u.matvec_t_acc(&da, &mut dh);
    }
    dxs
}
