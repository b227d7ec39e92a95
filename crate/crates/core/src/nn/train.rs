use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamConfig;
use super::model::{BiLstmModel, ModelConfig};
use super::Example;
use crate::corpus::TokenSequence;
use crate::datasets::split_indices;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};

/// Stream of the minibatch-order generator, kept apart from model
/// initialisation.
const SHUFFLE_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub test_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
    pub hidden_size: usize,
    pub dense1_size: usize,
    pub max_sequence_length: usize,
    pub trainable_embedding: bool,
    /// Gradient workers; results do not depend on this.
    pub threads: usize,
    /// Written into the report's Dataset column.
    pub dataset_id: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        TrainConfig {
            epochs: 10,
            batch_size: 256,
            adam: AdamConfig::default(),
            test_fraction: 0.2,
            stratified: true,
            seed: 1,
            hidden_size: m.hidden_size,
            dense1_size: m.dense1_size,
            max_sequence_length: m.max_sequence_length,
            trainable_embedding: m.trainable_embedding,
            threads: 1,
            dataset_id: "dataset".into(),
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden_size: self.hidden_size,
            dense1_size: self.dense1_size,
            max_sequence_length: self.max_sequence_length,
            trainable_embedding: self.trainable_embedding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.adam.lr >= 0.0 && self.adam.epsilon > 0.0) {
            return Err(Error::InvalidConfig("adam lr must be >= 0 and epsilon > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BiLstmModel,
    /// Mean training loss of each epoch, averaged over the minibatch losses
    /// seen during that epoch.
    pub loss_history: Vec<f64>,
    /// Metrics on the held-out split.
    pub report: EvalReport,
    /// Positions in the input dataset.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub test_scores: Vec<f64>,
}

/// Splits `data`, trains `model` on the training part with minibatch Adam
/// and evaluates on the held-out part.
pub fn train(
    mut model: BiLstmModel,
    data: &[(TokenSequence, u8)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let labels: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidConfig(format!("label {bad} is not 0 or 1")));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::DegenerateLabels);
    }
    let (train_indices, test_indices) =
        split_indices(&labels, cfg.test_fraction, cfg.seed, cfg.stratified)?;
    if train_indices.is_empty() || test_indices.is_empty() {
        return Err(Error::InvalidConfig(
            "dataset too small for the requested test fraction".into(),
        ));
    }
    let encode = |i: usize| -> Example { (model.encode(&data[i].0), data[i].1) };
    let mut train_set: Vec<Example> = train_indices.iter().map(|&i| encode(i)).collect();
    let test_set: Vec<Example> = test_indices.iter().map(|&i| encode(i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut adam = model.new_adam_state();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        train_set.shuffle(&mut rng);
        let mut weighted = 0.0;
        for batch in train_set.chunks(cfg.batch_size) {
            let (loss, grads) = model.loss_and_gradients_threaded(batch, cfg.threads)?;
            model.apply_adam(&grads, &mut adam, &cfg.adam);
            weighted += loss * batch.len() as f64;
        }
        loss_history.push(weighted / train_set.len() as f64);
    }

    let test_scores: Vec<f64> = test_set
        .iter()
        .map(|(ids, _)| model.forward(ids))
        .collect::<Result<_>>()?;
    let test_labels: Vec<u8> = test_set.iter().map(|(_, y)| *y).collect();
    let report = evaluate("bilstm", &cfg.dataset_id, &test_scores, &test_labels)?;
    Ok(TrainOutcome {
        model,
        loss_history,
        report,
        train_indices,
        test_indices,
        test_scores,
    })
}
