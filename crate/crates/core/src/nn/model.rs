use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{AdamConfig, AdamState};
use super::lstm::{backward_sequence, run_sequence, LstmParams};
use super::tensor::{add_slices, sigmoid, Matrix};
use super::{bce_loss, Example};
use crate::corpus::TokenSequence;
use crate::embeddings::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};

/// Examples per gradient chunk. Chunk sums are reduced in index order, so
/// the result does not depend on how many threads computed them.
const GRAD_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub dense1_size: usize,
    pub max_sequence_length: usize,
    pub trainable_embedding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 64,
            dense1_size: 16,
            max_sequence_length: 64,
            trainable_embedding: true,
        }
    }
}

/// Fully connected layer, `out x in` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros_like(&self) -> Dense {
        Dense {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn add_assign(&mut self, other: &Dense) {
        self.weights.add_assign(&other.weights);
        add_slices(&mut self.bias, &other.bias);
    }
}

/// Embedding -> forward and backward LSTM -> concatenated final hidden
/// states -> linear dense layer -> single sigmoid unit.
///
/// Row 0 of the embedding table is reserved for padding and unknown tokens.
/// It stays zero and never receives updates; vocabulary id `i` lives in
/// row `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel {
    vocab: Vocabulary,
    pub embedding: Matrix,
    pub trainable_embedding: bool,
    pub forward_lstm: LstmParams,
    pub backward_lstm: LstmParams,
    pub dense1: Dense,
    pub dense2: Dense,
    pub max_sequence_length: usize,
}

/// Gradients, shaped like the model. Embedding gradients are kept per
/// touched table row.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmGrads {
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub forward_lstm: LstmParams,
    pub backward_lstm: LstmParams,
    pub dense1: Dense,
    pub dense2: Dense,
}

/// A named, flat view of one parameter tensor.
pub struct ParamGroup<'a> {
    pub name: &'static str,
    pub values: &'a mut [f64],
}

struct ForwardPass<'a> {
    xs: Vec<&'a [f64]>,
    fwd: Vec<super::lstm::StepCache>,
    bwd: Vec<super::lstm::StepCache>,
    features: Vec<f64>,
    z1: Vec<f64>,
    p: f64,
}

impl BiLstmModel {
    /// A freshly initialised model whose embedding table is copied from
    /// `embeddings`. All randomness comes from `seed`.
    pub fn new(embeddings: &EmbeddingMatrix, cfg: &ModelConfig, seed: u64) -> Result<Self> {
        if cfg.hidden_size == 0 || cfg.dense1_size == 0 || cfg.max_sequence_length == 0 {
            return Err(Error::InvalidConfig(
                "hidden_size, dense1_size and max_sequence_length must be >= 1".into(),
            ));
        }
        let dim = embeddings.dim();
        let mut table = vec![0.0; dim];
        table.extend_from_slice(embeddings.as_slice());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forward_lstm = LstmParams::init(dim, cfg.hidden_size, &mut rng);
        let backward_lstm = LstmParams::init(dim, cfg.hidden_size, &mut rng);
        let dense1 = Dense {
            weights: Matrix::glorot(cfg.dense1_size, 2 * cfg.hidden_size, &mut rng),
            bias: vec![0.0; cfg.dense1_size],
        };
        let dense2 = Dense {
            weights: Matrix::glorot(1, cfg.dense1_size, &mut rng),
            bias: vec![0.0],
        };
        Ok(BiLstmModel {
            vocab: embeddings.vocab().clone(),
            embedding: Matrix::from_vec(embeddings.len() + 1, dim, table),
            trainable_embedding: cfg.trainable_embedding,
            forward_lstm,
            backward_lstm,
            dense1,
            dense2,
            max_sequence_length: cfg.max_sequence_length,
        })
    }

    /// Assembles a model from explicit tensors, checking that all shapes
    /// agree.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        vocab: Vocabulary,
        embedding: Matrix,
        trainable_embedding: bool,
        forward_lstm: LstmParams,
        backward_lstm: LstmParams,
        dense1: Dense,
        dense2: Dense,
        max_sequence_length: usize,
    ) -> Result<Self> {
        let model = BiLstmModel {
            vocab,
            embedding,
            trainable_embedding,
            forward_lstm,
            backward_lstm,
            dense1,
            dense2,
            max_sequence_length,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let mismatch = |expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, actual })
            }
        };
        let dim = self.embedding.cols();
        let h = self.forward_lstm.hidden_size();
        mismatch(self.vocab.len() + 1, self.embedding.rows())?;
        for lstm in [&self.forward_lstm, &self.backward_lstm] {
            mismatch(dim, lstm.input_size())?;
            mismatch(h, lstm.hidden_size())?;
            mismatch(4 * h, lstm.w.rows())?;
            mismatch(4 * h, lstm.u.rows())?;
            mismatch(4 * h, lstm.b.len())?;
        }
        mismatch(2 * h, self.dense1.weights.cols())?;
        mismatch(self.dense1.weights.rows(), self.dense1.bias.len())?;
        mismatch(self.dense1.weights.rows(), self.dense2.weights.cols())?;
        mismatch(1, self.dense2.weights.rows())?;
        mismatch(1, self.dense2.bias.len())?;
        if self.max_sequence_length == 0 {
            return Err(Error::InvalidConfig("max_sequence_length must be >= 1".into()));
        }
        if self.embedding.row(0).iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidConfig("padding row must be zero".into()));
        }
        Ok(())
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn hidden_size(&self) -> usize {
        self.forward_lstm.hidden_size()
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            hidden_size: self.hidden_size(),
            dense1_size: self.dense1.bias.len(),
            max_sequence_length: self.max_sequence_length,
            trainable_embedding: self.trainable_embedding,
        }
    }

    /// Maps tokens to table rows: unknown tokens become the padding row,
    /// the tail beyond `max_sequence_length` is dropped, and an empty
    /// sequence becomes a single padding step.
    pub fn encode(&self, tokens: &TokenSequence) -> Vec<usize> {
        let mut ids: Vec<usize> = tokens
            .iter()
            .take(self.max_sequence_length)
            .map(|t| self.vocab.id(t).map_or(0, |i| i + 1))
            .collect();
        if ids.is_empty() {
            ids.push(0);
        }
        ids
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.embedding.rows()) {
            return Err(Error::InvalidConfig(format!("token id {bad} out of range")));
        }
        Ok(())
    }

    fn run(&self, ids: &[usize]) -> ForwardPass<'_> {
        let ids = &ids[..ids.len().min(self.max_sequence_length)];
        let xs: Vec<&[f64]> = ids.iter().map(|&id| self.embedding.row(id)).collect();
        let fwd = run_sequence(&self.forward_lstm, xs.iter().copied());
        let bwd = run_sequence(&self.backward_lstm, xs.iter().rev().copied());
        let mut features = fwd.last().expect("non-empty").h().to_vec();
        features.extend_from_slice(bwd.last().expect("non-empty").h());
        let mut z1 = self.dense1.bias.clone();
        self.dense1.weights.matvec_acc(&features, &mut z1);
        let logit = self.dense2.bias[0]
            + self
                .dense2
                .weights
                .row(0)
                .iter()
                .zip(&z1)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        ForwardPass {
            xs,
            fwd,
            bwd,
            features,
            z1,
            p: sigmoid(logit),
        }
    }

    /// Probability that the sequence of table rows `ids` is positive.
    /// Only the first `max_sequence_length` ids are read.
    pub fn forward(&self, ids: &[usize]) -> Result<f64> {
        self.check_ids(ids)?;
        Ok(self.run(ids).p)
    }

    pub fn predict(&self, tokens: &TokenSequence) -> f64 {
        self.run(&self.encode(tokens)).p
    }

    pub fn zero_grads(&self) -> BiLstmGrads {
        let h = self.hidden_size();
        let dim = self.embedding.cols();
        BiLstmGrads {
            embedding: BTreeMap::new(),
            forward_lstm: LstmParams::zeros(dim, h),
            backward_lstm: LstmParams::zeros(dim, h),
            dense1: self.dense1.zeros_like(),
            dense2: self.dense2.zeros_like(),
        }
    }

    /// Adds `coeff * dBCE/dparams` for one example into `grads` and returns
    /// its loss.
    fn accumulate(&self, ids: &[usize], label: u8, coeff: f64, grads: &mut BiLstmGrads) -> f64 {
        let pass = self.run(ids);
        let y = f64::from(label);
        let loss = bce_loss(pass.p, y);
        let h = self.hidden_size();

        // d(BCE)/d(logit) for a sigmoid output is p - y.
        let dlogit = (pass.p - y) * coeff;
        for (g, z) in grads.dense2.weights.row_mut(0).iter_mut().zip(&pass.z1) {
            *g += dlogit * z;
        }
        grads.dense2.bias[0] += dlogit;
        let dz1: Vec<f64> = self.dense2.weights.row(0).iter().map(|w| w * dlogit).collect();
        grads.dense1.weights.outer_acc(&dz1, &pass.features);
        add_slices(&mut grads.dense1.bias, &dz1);
        let mut dfeatures = vec![0.0; 2 * h];
        self.dense1.weights.matvec_t_acc(&dz1, &mut dfeatures);

        let want_dx = self.trainable_embedding;
        let dx_fwd = backward_sequence(
            &self.forward_lstm,
            &pass.xs,
            &pass.fwd,
            &dfeatures[..h],
            &mut grads.forward_lstm,
            want_dx,
        );
        let reversed: Vec<&[f64]> = pass.xs.iter().rev().copied().collect();
        let dx_bwd = backward_sequence(
            &self.backward_lstm,
            &reversed,
            &pass.bwd,
            &dfeatures[h..],
            &mut grads.backward_lstm,
            want_dx,
        );
        if want_dx {
            let n = pass.xs.len();
            let dim = self.embedding.cols();
            for (t, &id) in ids.iter().take(n).enumerate() {
                if id == 0 {
                    continue;
                }
                let row = grads.embedding.entry(id).or_insert_with(|| vec![0.0; dim]);
                add_slices(row, &dx_fwd[t]);
                add_slices(row, &dx_bwd[n - 1 - t]);
            }
        }
        loss
    }

    fn chunk_grads(&self, chunk: &[Example], coeff: f64) -> (f64, BiLstmGrads) {
        let mut grads = self.zero_grads();
        let loss = chunk
            .iter()
            .map(|(ids, y)| self.accumulate(ids, *y, coeff, &mut grads))
            .sum();
        (loss, grads)
    }

    /// Mean BCE over `batch` and its exact gradient.
    pub fn loss_and_gradients(&self, batch: &[Example]) -> Result<(f64, BiLstmGrads)> {
        self.loss_and_gradients_threaded(batch, 1)
    }

    /// Same as [`loss_and_gradients`](Self::loss_and_gradients), spreading
    /// examples over `threads` workers. The result is bit-identical for any
    /// thread count.
    pub fn loss_and_gradients_threaded(
        &self,
        batch: &[Example],
        threads: usize,
    ) -> Result<(f64, BiLstmGrads)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (ids, y) in batch {
            self.check_ids(ids)?;
            if *y > 1 {
                return Err(Error::InvalidConfig(format!("label {y} is not 0 or 1")));
            }
        }
        let coeff = 1.0 / batch.len() as f64;
        let chunks: Vec<&[Example]> = batch.chunks(GRAD_CHUNK).collect();
        let partials: Vec<(f64, BiLstmGrads)> = if threads <= 1 || chunks.len() == 1 {
            chunks.iter().map(|c| self.chunk_grads(c, coeff)).collect()
        } else {
            let per_worker = chunks.len().div_ceil(threads);
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .chunks(per_worker)
                    .map(|group| {
                        scope.spawn(move || {
                            group
                                .iter()
                                .map(|c| self.chunk_grads(c, coeff))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("gradient worker panicked"))
                    .collect()
            })
        };
        let mut total = self.zero_grads();
        let mut loss = 0.0;
        for (l, g) in &partials {
            loss += l;
            total.add_assign(g);
        }
        Ok((loss * coeff, total))
    }

    /// Mean BCE over `batch` without gradients.
    pub fn batch_loss(&self, batch: &[Example]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut total = 0.0;
        for (ids, y) in batch {
            self.check_ids(ids)?;
            total += bce_loss(self.run(ids).p, f64::from(*y));
        }
        Ok(total / batch.len() as f64)
    }

    /// Every trainable tensor, in a fixed order. The embedding group covers
    /// table rows `1..` and is present only when the embedding is trainable.
    pub fn parameter_groups_mut(&mut self) -> Vec<ParamGroup<'_>> {
        let dim = self.embedding.cols();
        let mut groups = Vec::with_capacity(11);
        if self.trainable_embedding {
            groups.push(ParamGroup {
                name: "embedding",
                values: &mut self.embedding.as_mut_slice()[dim..],
            });
        }
        let [fw, fu, fb] = lstm_groups(&mut self.forward_lstm, ["forward.W", "forward.U", "forward.b"]);
        let [bw, bu, bb] =
            lstm_groups(&mut self.backward_lstm, ["backward.W", "backward.U", "backward.b"]);
        groups.extend([fw, fu, fb, bw, bu, bb]);
        groups.push(ParamGroup {
            name: "dense1.W",
            values: self.dense1.weights.as_mut_slice(),
        });
        groups.push(ParamGroup {
            name: "dense1.b",
            values: &mut self.dense1.bias,
        });
        groups.push(ParamGroup {
            name: "dense2.W",
            values: self.dense2.weights.as_mut_slice(),
        });
        groups.push(ParamGroup {
            name: "dense2.b",
            values: &mut self.dense2.bias,
        });
        groups
    }

    pub fn new_adam_state(&mut self) -> AdamState {
        let sizes: Vec<usize> = self
            .parameter_groups_mut()
            .iter()
            .map(|g| g.values.len())
            .collect();
        AdamState::new(&sizes)
    }

    /// One Adam step using `grads`.
    pub fn apply_adam(&mut self, grads: &BiLstmGrads, state: &mut AdamState, cfg: &AdamConfig) {
        let dim = self.embedding.cols();
        let dense = grads.dense_groups_without_embedding();
        let trainable = self.trainable_embedding;
        state.begin_step();
        let scalars = state.scalars(cfg);
        let groups = self.parameter_groups_mut();
        let mut dense_iter = dense.iter();
        for (idx, group) in groups.into_iter().enumerate() {
            let (m, v) = state.moments_mut(idx);
            if trainable && idx == 0 {
                let zero = vec![0.0; dim];
                for (r, ((p, m), v)) in group
                    .values
                    .chunks_exact_mut(dim)
                    .zip(m.chunks_exact_mut(dim))
                    .zip(v.chunks_exact_mut(dim))
                    .enumerate()
                {
                    let g = grads.embedding.get(&(r + 1)).unwrap_or(&zero);
                    scalars.update(p, g, m, v);
                }
            } else {
                let g = dense_iter.next().expect("group counts agree");
                scalars.update(group.values, g, m, v);
            }
        }
    }
}

fn lstm_groups<'a>(p: &'a mut LstmParams, names: [&'static str; 3]) -> [ParamGroup<'a>; 3] {
    [
        ParamGroup {
            name: names[0],
            values: p.w.as_mut_slice(),
        },
        ParamGroup {
            name: names[1],
            values: p.u.as_mut_slice(),
        },
        ParamGroup {
            name: names[2],
            values: &mut p.b,
        },
    ]
}

impl BiLstmGrads {
    pub fn add_assign(&mut self, other: &BiLstmGrads) {
        for (id, g) in &other.embedding {
            match self.embedding.get_mut(id) {
                Some(row) => add_slices(row, g),
                None => {
                    self.embedding.insert(*id, g.clone());
                }
            }
        }
        self.forward_lstm.add_assign(&other.forward_lstm);
        self.backward_lstm.add_assign(&other.backward_lstm);
        self.dense1.add_assign(&other.dense1);
        self.dense2.add_assign(&other.dense2);
    }

    fn dense_groups_without_embedding(&self) -> [&[f64]; 10] {
        [
            self.forward_lstm.w.as_slice(),
            self.forward_lstm.u.as_slice(),
            &self.forward_lstm.b,
            self.backward_lstm.w.as_slice(),
            self.backward_lstm.u.as_slice(),
            &self.backward_lstm.b,
            self.dense1.weights.as_slice(),
            &self.dense1.bias,
            self.dense2.weights.as_slice(),
            &self.dense2.bias,
        ]
    }

    /// Gradients laid out exactly like
    /// [`BiLstmModel::parameter_groups_mut`].
    pub fn dense_groups(&self, model: &BiLstmModel) -> Vec<(&'static str, Vec<f64>)> {
        let mut out = Vec::with_capacity(11);
        if model.trainable_embedding {
            let dim = model.embedding.cols();
            let mut table = vec![0.0; (model.embedding.rows() - 1) * dim];
            for (&id, g) in &self.embedding {
                table[(id - 1) * dim..id * dim].copy_from_slice(g);
            }
            out.push(("embedding", table));
        }
        let names = [
            "forward.W",
            "forward.U",
            "forward.b",
            "backward.W",
            "backward.U",
            "backward.b",
            "dense1.W",
            "dense1.b",
            "dense2.W",
            "dense2.b",
        ];
        out.extend(
            names
                .into_iter()
                .zip(self.dense_groups_without_embedding())
                .map(|(n, g)| (n, g.to_vec())),
        );
        out
    }

    pub fn is_all_zero(&self) -> bool {
        self.embedding.values().flatten().all(|&x| x == 0.0)
            && self
                .dense_groups_without_embedding()
                .iter()
                .all(|g| g.iter().all(|&x| x == 0.0))
    }
}
