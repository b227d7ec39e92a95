//! Continuous bag-of-words training with negative sampling.
//!
//! For a target word `t` with context words `c_1..c_n` the context vector is
//! the mean `h = (1/n) sum v_{c_j}` of input vectors, and the loss of one
//! training pair is
//!
//! ```text
//! L = -ln sigma(h . u_t) - sum_{k=1..K} ln sigma(-h . u_{n_k})
//! ```
//!
//! where `u` are output vectors and `n_k` are noise words drawn from the
//! unigram distribution raised to the 3/4 power. Input vectors start uniform
//! in `[-0.5/dim, 0.5/dim)`, output vectors start at zero, and the learning
//! rate decays linearly from `initial_lr` to `initial_lr / 10`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_vocab, EmbeddingMatrix, Vocabulary};
use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Single-threaded, fixed window. Bit-reproducible for a given seed.
    Deterministic,
    /// Lock-free updates from several threads with a dynamic window
    /// (uniform in `1..=window` per position). Not reproducible.
    Parallel { threads: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    /// Frequent-word downsampling threshold; 0 disables it.
    pub subsample_threshold: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 300,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_count: 5,
            subsample_threshold: 1e-3,
            seed: 1,
            mode: TrainMode::Deterministic,
        }
    }
}

impl CbowConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.negative_samples == 0 {
            return bad("negative_samples must be >= 1");
        }
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be a finite non-negative number");
        }
        if !(self.subsample_threshold >= 0.0) {
            return bad("subsample_threshold must be >= 0");
        }
        if let TrainMode::Parallel { threads: 0 } = self.mode {
            return bad("threads must be >= 1");
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct CbowRun {
    pub embeddings: EmbeddingMatrix,
    /// Mean pair loss of every epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

/// Gradient of one pair's loss, keyed by token id. Every id appears once.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub input: BTreeMap<usize, Vec<f64>>,
    pub output: BTreeMap<usize, Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln sigmoid(x)`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Somewhere to read vectors from and hand gradients to.
trait VectorStore {
    fn read(&self, id: usize, buf: &mut [f64]);
    /// Receives `coeff * direction` as the loss gradient for row `id`.
    fn gradient(&mut self, id: usize, direction: &[f64], coeff: f64);
}

/// One CBOW pair. Output gradients are delivered (and, for SGD stores,
/// applied) sample by sample; input gradients are delivered at the end.
/// Noise words equal to the target are skipped.
fn pair_kernel<I: VectorStore, O: VectorStore>(
    inputs: &mut I,
    outputs: &mut O,
    dim: usize,
    context: &[usize],
    target: usize,
    negatives: &[usize],
    scratch: &mut Scratch,
) -> f64 {
    let Scratch { h, grad_h, u } = scratch;
    h.iter_mut().for_each(|x| *x = 0.0);
    grad_h.iter_mut().for_each(|x| *x = 0.0);
    for &c in context {
        inputs.read(c, u);
        for (a, x) in h.iter_mut().zip(u.iter()) {
            *a += x;
        }
    }
    let inv_n = 1.0 / context.len() as f64;
    h.iter_mut().for_each(|x| *x *= inv_n);

    let mut loss = 0.0;
    let samples = std::iter::once((target, 1.0))
        .chain(negatives.iter().filter(|&&n| n != target).map(|&n| (n, 0.0)));
    for (word, label) in samples {
        outputs.read(word, u);
        let score: f64 = h.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        loss += if label == 1.0 {
            neg_log_sigmoid(score)
        } else {
            neg_log_sigmoid(-score)
        };
        let g = sigmoid(score) - label;
        for (gh, x) in grad_h.iter_mut().zip(u.iter()) {
            *gh += g * x;
        }
        outputs.gradient(word, h, g);
    }
    for &c in context {
        inputs.gradient(c, grad_h, inv_n);
    }
    debug_assert_eq!(h.len(), dim);
    loss
}

struct Scratch {
    h: Vec<f64>,
    grad_h: Vec<f64>,
    u: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            h: vec![0.0; dim],
            grad_h: vec![0.0; dim],
            u: vec![0.0; dim],
        }
    }
}

/// Read-only view that accumulates gradients instead of applying them.
struct Recorder<'a> {
    values: &'a [f64],
    dim: usize,
    grads: BTreeMap<usize, Vec<f64>>,
}

impl VectorStore for Recorder<'_> {
    fn read(&self, id: usize, buf: &mut [f64]) {
        buf.copy_from_slice(&self.values[id * self.dim..(id + 1) * self.dim]);
    }

    fn gradient(&mut self, id: usize, direction: &[f64], coeff: f64) {
        let g = self.grads.entry(id).or_insert_with(|| vec![0.0; self.dim]);
        for (a, d) in g.iter_mut().zip(direction) {
            *a += coeff * d;
        }
    }
}

/// Exact gradient of a single pair's loss with respect to the flat
/// `|V| x dim` input and output matrices.
pub fn cbow_pair_gradient(
    input_vectors: &[f64],
    output_vectors: &[f64],
    dim: usize,
    context: &[usize],
    target: usize,
    negatives: &[usize],
) -> Result<PairGradient> {
    if context.is_empty() {
        return Err(Error::EmptyInput);
    }
    if input_vectors.len() != output_vectors.len() || !input_vectors.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: input_vectors.len(),
            actual: output_vectors.len(),
        });
    }
    let mut inputs = Recorder {
        values: input_vectors,
        dim,
        grads: BTreeMap::new(),
    };
    let mut outputs = Recorder {
        values: output_vectors,
        dim,
        grads: BTreeMap::new(),
    };
    let loss = pair_kernel(
        &mut inputs,
        &mut outputs,
        dim,
        context,
        target,
        negatives,
        &mut Scratch::new(dim),
    );
    Ok(PairGradient {
        loss,
        input: inputs.grads,
        output: outputs.grads,
    })
}

/// Row-major matrix of `f64` stored as bit patterns so several threads can
/// update it without locks. Relaxed loads and stores compile to plain moves,
/// so single-threaded training pays nothing for it.
struct AtomicMatrix {
    dim: usize,
    cells: Vec<AtomicU64>,
}

impl AtomicMatrix {
    fn from_values(values: Vec<f64>, dim: usize) -> Self {
        AtomicMatrix {
            dim,
            cells: values.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
        }
    }

    fn into_values(self) -> Vec<f64> {
        self.cells
            .into_iter()
            .map(|c| f64::from_bits(c.into_inner()))
            .collect()
    }
}

/// Applies gradients immediately: `row -= lr * gradient`.
struct Sgd<'a> {
    matrix: &'a AtomicMatrix,
    lr: f64,
}

impl VectorStore for Sgd<'_> {
    fn read(&self, id: usize, buf: &mut [f64]) {
        let row = &self.matrix.cells[id * self.matrix.dim..(id + 1) * self.matrix.dim];
        for (b, c) in buf.iter_mut().zip(row) {
            *b = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn gradient(&mut self, id: usize, direction: &[f64], coeff: f64) {
        let step = self.lr * coeff;
        let row = &self.matrix.cells[id * self.matrix.dim..(id + 1) * self.matrix.dim];
        for (c, d) in row.iter().zip(direction) {
            let x = f64::from_bits(c.load(Ordering::Relaxed));
            c.store((x - step * d).to_bits(), Ordering::Relaxed);
        }
    }
}

/// Initial input vectors for a vocabulary of `n` words.
pub fn init_input_vectors(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect()
}

struct Corpus<'a> {
    sentences: &'a [Vec<usize>],
    keep_prob: Option<Vec<f64>>,
    noise: WeightedIndex<f64>,
    total_positions: u64,
}

struct Shared<'a> {
    inputs: &'a AtomicMatrix,
    outputs: &'a AtomicMatrix,
    processed: &'a AtomicU64,
}

/// Runs one epoch over `sentences` and returns (loss sum, pair count).
fn run_epoch(
    cfg: &CbowConfig,
    corpus: &Corpus<'_>,
    sentences: &[Vec<usize>],
    shared: &Shared<'_>,
    rng: &mut ChaCha8Rng,
) -> (f64, u64) {
    let dynamic_window = matches!(cfg.mode, TrainMode::Parallel { .. });
    let total = (corpus.total_positions * cfg.epochs as u64).max(1) as f64;
    let mut scratch = Scratch::new(cfg.dim);
    let mut kept = Vec::new();
    let mut context = Vec::with_capacity(2 * cfg.window);
    let mut negatives = vec![0usize; cfg.negative_samples];
    let mut loss_sum = 0.0;
    let mut pairs = 0u64;

    for sentence in sentences {
        kept.clear();
        match &corpus.keep_prob {
            Some(p) => kept.extend(sentence.iter().copied().filter(|&w| p[w] >= rng.gen::<f64>())),
            None => kept.extend_from_slice(sentence),
        }
        for pos in 0..kept.len() {
            let done = shared.processed.fetch_add(1, Ordering::Relaxed) as f64;
            let lr = cfg.initial_lr * (1.0 - 0.9 * done / total).max(0.1);
            let reach = if dynamic_window {
                rng.gen_range(1..=cfg.window)
            } else {
                cfg.window
            };
            context.clear();
            let lo = pos.saturating_sub(reach);
            let hi = (pos + reach + 1).min(kept.len());
            context.extend((lo..hi).filter(|&j| j != pos).map(|j| kept[j]));
            if context.is_empty() {
                continue;
            }
            for n in negatives.iter_mut() {
                *n = corpus.noise.sample(rng);
            }
            let mut inputs = Sgd {
                matrix: shared.inputs,
                lr,
            };
            let mut outputs = Sgd {
                matrix: shared.outputs,
                lr,
            };
            loss_sum += pair_kernel(
                &mut inputs,
                &mut outputs,
                cfg.dim,
                &context,
                kept[pos],
                &negatives,
                &mut scratch,
            );
            pairs += 1;
        }
        // Positions dropped by subsampling still advance the schedule.
        let dropped = sentence.len() - kept.len();
        shared.processed.fetch_add(dropped as u64, Ordering::Relaxed);
    }
    (loss_sum, pairs)
}

fn keep_probabilities(vocab: &Vocabulary, threshold: f64) -> Option<Vec<f64>> {
    if threshold <= 0.0 {
        return None;
    }
    let total: u64 = vocab.counts().iter().sum();
    let scaled = threshold * total as f64;
    Some(
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let c = c as f64;
                ((c / scaled).sqrt() + 1.0) * scaled / c
            })
            .collect(),
    )
}

/// Trains CBOW embeddings and returns the input-side vectors.
pub fn train_cbow<'a, I>(corpus: I, cfg: &CbowConfig) -> Result<EmbeddingMatrix>
where
    I: IntoIterator<Item = &'a TokenSequence>,
    I::IntoIter: Clone,
{
    train_cbow_with_history(corpus, cfg).map(|run| run.embeddings)
}

/// Like [`train_cbow`] but also reports the per-epoch mean loss.
pub fn train_cbow_with_history<'a, I>(corpus: I, cfg: &CbowConfig) -> Result<CbowRun>
where
    I: IntoIterator<Item = &'a TokenSequence>,
    I::IntoIter: Clone,
{
    cfg.validate()?;
    let docs = corpus.into_iter();
    let vocab = build_vocab(docs.clone(), cfg.min_count)?;
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let sentences: Vec<Vec<usize>> = docs
        .map(|doc| doc.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();
    if !sentences.iter().any(|s| s.len() >= 2) {
        return Err(Error::InsufficientContext);
    }

    let weights: Vec<f64> = vocab.counts().iter().map(|&c| (c as f64).powf(0.75)).collect();
    let corpus = Corpus {
        sentences: &sentences,
        keep_prob: keep_probabilities(&vocab, cfg.subsample_threshold),
        noise: WeightedIndex::new(&weights).expect("vocabulary counts are positive"),
        total_positions: sentences.iter().map(|s| s.len() as u64).sum(),
    };

    let n = vocab.len();
    let inputs = AtomicMatrix::from_values(init_input_vectors(n, cfg.dim, cfg.seed), cfg.dim);
    let outputs = AtomicMatrix::from_values(vec![0.0; n * cfg.dim], cfg.dim);
    let processed = AtomicU64::new(0);
    let shared = Shared {
        inputs: &inputs,
        outputs: &outputs,
        processed: &processed,
    };

    let threads = match cfg.mode {
        TrainMode::Deterministic => 1,
        TrainMode::Parallel { threads } => threads.min(sentences.len()).max(1),
    };
    let mut rngs: Vec<ChaCha8Rng> = (0..threads)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + t as u64);
            rng
        })
        .collect();
    let chunk = sentences.len().div_ceil(threads);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, pairs) = if threads == 1 {
            run_epoch(cfg, &corpus, corpus.sentences, &shared, &mut rngs[0])
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = corpus
                    .sentences
                    .chunks(chunk)
                    .zip(rngs.iter_mut())
                    .map(|(part, rng)| {
                        let (corpus, shared) = (&corpus, &shared);
                        scope.spawn(move || run_epoch(cfg, corpus, part, shared, rng))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training thread panicked"))
                    .fold((0.0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1))
            })
        };
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }

    let embeddings = EmbeddingMatrix::new(vocab, cfg.dim, inputs.into_values())?;
    Ok(CbowRun {
        embeddings,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_corpus(reps: usize) -> Vec<TokenSequence> {
        (0..reps)
            .flat_map(|_| {
                [
                    TokenSequence::from_whitespace("king rules the realm"),
                    TokenSequence::from_whitespace("queen rules the realm"),
                ]
            })
            .collect()
    }

    fn toy_cfg(seed: u64) -> CbowConfig {
        CbowConfig {
            dim: 2,
            window: 5,
            negative_samples: 5,
            epochs: 1,
            initial_lr: 0.0,
            min_count: 1,
            subsample_threshold: 0.0,
            seed,
            mode: TrainMode::Deterministic,
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let corpus = toy_corpus(10);
        let emb = train_cbow(&corpus, &toy_cfg(9)).unwrap();
        assert_eq!(emb.as_slice(), init_input_vectors(emb.len(), 2, 9).as_slice());
    }

    #[test]
    fn init_range() {
        let v = init_input_vectors(50, 4, 1);
        assert!(v.iter().all(|x| (-0.125..0.125).contains(x)));
    }

    #[test]
    fn config_validation() {
        for bad in [
            CbowConfig { dim: 0, ..toy_cfg(1) },
            CbowConfig { window: 0, ..toy_cfg(1) },
            CbowConfig { negative_samples: 0, ..toy_cfg(1) },
            CbowConfig { initial_lr: -1.0, ..toy_cfg(1) },
            CbowConfig { mode: TrainMode::Parallel { threads: 0 }, ..toy_cfg(1) },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn insufficient_context() {
        let corpus = vec![
            TokenSequence::from_whitespace("alone"),
            TokenSequence::from_whitespace("alone"),
        ];
        assert!(matches!(
            train_cbow(&corpus, &toy_cfg(1)),
            Err(Error::InsufficientContext)
        ));
        let corpus = vec![TokenSequence::from_whitespace("a b c")];
        let cfg = CbowConfig { min_count: 2, ..toy_cfg(1) };
        assert!(matches!(train_cbow(&corpus, &cfg), Err(Error::EmptyVocabulary)));
    }

    #[test]
    fn subsampling_keeps_rare_words() {
        let vocab = Vocabulary::from_tokens(vec!["a".into(), "b".into()], vec![1000, 1], 1).unwrap();
        let p = keep_probabilities(&vocab, 1e-3).unwrap();
        assert!(p[0] < 0.1);
        assert!(p[1] > 1.0);
        assert!(keep_probabilities(&vocab, 0.0).is_none());
    }

    #[test]
    fn target_is_never_its_own_negative() {
        let dim = 2;
        let inputs = [0.1, 0.2, -0.3, 0.4];
        let outputs = [0.5, -0.1, 0.2, 0.3];
        let with = cbow_pair_gradient(&inputs, &outputs, dim, &[0], 1, &[1, 1]).unwrap();
        let without = cbow_pair_gradient(&inputs, &outputs, dim, &[0], 1, &[]).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn parallel_mode_runs() {
        let corpus = toy_corpus(50);
        let cfg = CbowConfig {
            dim: 8,
            epochs: 3,
            initial_lr: 0.05,
            mode: TrainMode::Parallel { threads: 3 },
            ..toy_cfg(4)
        };
        let run = train_cbow_with_history(&corpus, &cfg).unwrap();
        assert_eq!(run.epoch_losses.len(), 3);
        assert!(run.embeddings.as_slice().iter().all(|x| x.is_finite()));
        assert!(run.epoch_losses[2] < run.epoch_losses[0]);
    }
}
