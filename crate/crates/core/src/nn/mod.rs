//! Bidirectional LSTM binary classifier with hand-written backpropagation.

mod adam;
mod lstm;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use lstm::{lstm_cell_forward, Gate, LstmParams, LstmState};
pub use model::{BiLstmGrads, BiLstmModel, Dense, ModelConfig, ParamGroup};
pub use tensor::{sigmoid, Matrix};
pub use train::{train, TrainConfig, TrainOutcome};

/// Encoded example: embedding-table rows and a 0/1 label.
pub type Example = (Vec<usize>, u8);

/// Probabilities are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` before the
/// logarithm.
pub const BCE_EPSILON: f64 = 1e-7;

/// Binary cross-entropy `-[y ln p + (1 - y) ln(1 - p)]` on a clamped `p`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn bce_examples() {
        assert!(bce_loss(1.0 - BCE_EPSILON, 1.0) < 1e-6);
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.5, 0.0) - 0.693147).abs() < 1e-6);
        assert!((bce_loss(0.9, 0.0) - 2.302585).abs() < 1e-5);
        assert!(bce_loss(0.0, 1.0).is_finite());
        assert!(bce_loss(1.0, 0.0).is_finite());
    }
}
