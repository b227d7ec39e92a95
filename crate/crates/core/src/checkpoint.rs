//! Self-contained text checkpoints for trained classifiers.
//!
//! ```text
//! wsdetect-checkpoint 1
//! kind bilstm                      (or: lr)
//! vocab_hash <sha-256 hex of the vocabulary>
//! vocab_size <V>
//! min_count <n>
//! preprocess <flag>=<bool> ...    (text cleaning used in training)
//! <key> <value>                    (model settings, see below)
//! vocab
//! <token> <count>                  (V lines, in id order)
//! tensor <name> <rows> <cols>
//! <cols numbers>                   (rows lines)
//! ...
//! end
//! ```
//!
//! BiLSTM settings are `max_sequence_length` and `trainable_embedding`, and
//! its tensors are `embedding` (row 0 is padding), `forward.W`, `forward.U`,
//! `forward.b`, `backward.W`, `backward.U`, `backward.b`, `dense1.W`,
//! `dense1.b`, `dense2.W`, `dense2.b`, with biases stored as one row.
//! Logistic regression stores `trained_on` and the tensors `embedding`,
//! `lr.w` and `lr.b`. Numbers are written with the fewest digits that parse
//! back to the identical value, so a save/load round trip is lossless. The
//! vocabulary hash is recomputed on load and must match.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baseline::{lr_predict, LogRegModel};
use crate::corpus::{preprocess, PreprocessConfig, TokenSequence};
use crate::embeddings::{average_embedding, EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::{BiLstmModel, Dense, LstmParams, Matrix};
use crate::numfmt::Shortest;

const MAGIC: &str = "wsdetect-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Classifier {
    BiLstm(BiLstmModel),
    LogReg {
        model: LogRegModel,
        embeddings: EmbeddingMatrix,
    },
}

/// A trained classifier together with the text cleaning it was trained
/// with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub classifier: Classifier,
    pub preprocess: PreprocessConfig,
}

const PREPROCESS_FLAGS: [&str; 6] = [
    "lowercase",
    "strip_urls",
    "strip_mentions",
    "strip_hashtag_symbol",
    "strip_punctuation",
    "collapse_whitespace",
];

fn preprocess_flags(c: &mut PreprocessConfig) -> [&mut bool; 6] {
    [
        &mut c.lowercase,
        &mut c.strip_urls,
        &mut c.strip_mentions,
        &mut c.strip_hashtag_symbol,
        &mut c.strip_punctuation,
        &mut c.collapse_whitespace,
    ]
}

impl Checkpoint {
    /// `bilstm` or `lr`.
    pub fn kind(&self) -> &'static str {
        match self.classifier {
            Classifier::BiLstm(_) => "bilstm",
            Classifier::LogReg { .. } => "lr",
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match &self.classifier {
            Classifier::BiLstm(m) => m.vocab(),
            Classifier::LogReg { embeddings, .. } => embeddings.vocab(),
        }
    }

    /// Cleans `text` the way the training data was cleaned, then predicts.
    pub fn predict_text(&self, text: &str) -> f64 {
        self.predict(&preprocess(text, &self.preprocess))
    }

    pub fn vocab_hash(&self) -> String {
        self.vocab().content_hash()
    }

    /// Probability that `tokens` is positive.
    pub fn predict(&self, tokens: &TokenSequence) -> f64 {
        match &self.classifier {
            Classifier::BiLstm(m) => m.predict(tokens),
            Classifier::LogReg { model, embeddings } => {
                lr_predict(model, &average_embedding(embeddings, tokens))
                    .expect("checkpoint shapes are validated")
            }
        }
    }

    /// Fails with [`Error::Incompatible`] unless `embeddings` has the
    /// vocabulary this checkpoint was built on.
    pub fn check_embeddings(&self, embeddings: &EmbeddingMatrix) -> Result<()> {
        let ours = self.vocab_hash();
        let theirs = embeddings.vocab().content_hash();
        if ours == theirs {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "checkpoint vocabulary hash {ours} does not match embeddings hash {theirs}"
            )))
        }
    }
}

fn write_tensor<W: Write>(w: &mut W, name: &str, rows: usize, cols: usize, data: &[f64]) -> io::Result<()> {
    writeln!(w, "tensor {name} {rows} {cols}")?;
    for row in data.chunks(cols.max(1)) {
        let mut first = true;
        for x in row {
            if !first {
                w.write_all(b" ")?;
            }
            write!(w, "{}", Shortest(*x))?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn write_matrix<W: Write>(w: &mut W, name: &str, m: &Matrix) -> io::Result<()> {
    write_tensor(w, name, m.rows(), m.cols(), m.as_slice())
}

fn write_vec<W: Write>(w: &mut W, name: &str, v: &[f64]) -> io::Result<()> {
    write_tensor(w, name, 1, v.len(), v)
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> io::Result<()> {
    let vocab = ckpt.vocab();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "kind {}", ckpt.kind())?;
    writeln!(w, "vocab_hash {}", vocab.content_hash())?;
    writeln!(w, "vocab_size {}", vocab.len())?;
    writeln!(w, "min_count {}", vocab.min_count())?;
    let mut pre = ckpt.preprocess;
    write!(w, "preprocess")?;
    for (name, v) in PREPROCESS_FLAGS.iter().zip(preprocess_flags(&mut pre)) {
        write!(w, " {name}={v}")?;
    }
    writeln!(w)?;
    match &ckpt.classifier {
        Classifier::BiLstm(m) => {
            writeln!(w, "max_sequence_length {}", m.max_sequence_length)?;
            writeln!(w, "trainable_embedding {}", m.trainable_embedding)?;
        }
        Classifier::LogReg { model, .. } => {
            // Stored verbatim up to the first line break.
            writeln!(w, "trained_on {}", model.trained_on.lines().next().unwrap_or(""))?;
        }
    }
    writeln!(w, "vocab")?;
    for (tok, count) in vocab.tokens().iter().zip(vocab.counts()) {
        writeln!(w, "{tok} {count}")?;
    }
    match &ckpt.classifier {
        Classifier::BiLstm(m) => {
            write_matrix(&mut w, "embedding", &m.embedding)?;
            for (prefix, p) in [("forward", &m.forward_lstm), ("backward", &m.backward_lstm)] {
                write_matrix(&mut w, &format!("{prefix}.W"), &p.w)?;
                write_matrix(&mut w, &format!("{prefix}.U"), &p.u)?;
                write_vec(&mut w, &format!("{prefix}.b"), &p.b)?;
            }
            write_matrix(&mut w, "dense1.W", &m.dense1.weights)?;
            write_vec(&mut w, "dense1.b", &m.dense1.bias)?;
            write_matrix(&mut w, "dense2.W", &m.dense2.weights)?;
            write_vec(&mut w, "dense2.b", &m.dense2.bias)?;
        }
        Classifier::LogReg { model, embeddings } => {
            write_tensor(&mut w, "embedding", embeddings.len(), embeddings.dim(), embeddings.as_slice())?;
            write_vec(&mut w, "lr.w", &model.weights)?;
            write_vec(&mut w, "lr.b", &[model.bias])?;
        }
    }
    writeln!(w, "end")?;
    w.flush()
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(ckpt, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: u64,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(&self.path, self.line, msg)
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i as u64 + 1;
                Ok(l.strip_suffix('\r').unwrap_or(l))
            }
            None => {
                self.line += 1;
                Err(self.err("unexpected end of file"))
            }
        }
    }

    fn key(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ if l == key => Ok(""),
            _ => Err(self.err(format!("expected {key:?}, found {l:?}"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.key(key)?;
        v.trim()
            .parse()
            .map_err(|_| self.err(format!("invalid value for {key}: {v:?}")))
    }

    fn tensor(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let header = self.key("tensor")?;
        let parts: Vec<&str> = header.split(' ').collect();
        let shape = (rows.to_string(), cols.to_string());
        if parts.len() != 3 || parts[0] != name || (parts[1], parts[2]) != (&shape.0[..], &shape.1[..]) {
            return Err(self.err(format!(
                "expected tensor {name} {rows} {cols}, found {header:?}"
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let l = self.next()?;
            let before = data.len();
            for tok in l.split(' ').filter(|t| !t.is_empty()) {
                let x: f64 = tok
                    .parse()
                    .map_err(|_| self.err(format!("{name}: not a number: {tok:?}")))?;
                if !x.is_finite() {
                    return Err(self.err(format!("{name}: non-finite value")));
                }
                data.push(x);
            }
            if data.len() - before != cols {
                return Err(self.err(format!(
                    "{name}: expected {cols} values, found {}",
                    data.len() - before
                )));
            }
        }
        Ok(data)
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        Ok(Matrix::from_vec(rows, cols, self.tensor(name, rows, cols)?))
    }

    /// Column count of the next tensor header, without consuming it.
    fn peek_cols(&self) -> Option<usize> {
        let mut it = self.iter.clone();
        let (_, l) = it.next()?;
        l.split(' ').nth(3)?.trim().parse().ok()
    }

    /// Row count of the next tensor header, without consuming it.
    fn peek_rows(&self) -> Option<usize> {
        let mut it = self.iter.clone();
        let (_, l) = it.next()?;
        l.split(' ').nth(2)?.trim().parse().ok()
    }
}

fn lstm(lines: &mut Lines<'_>, prefix: &str, dim: usize, h: usize) -> Result<LstmParams> {
    Ok(LstmParams {
        w: lines.matrix(&format!("{prefix}.W"), 4 * h, dim)?,
        u: lines.matrix(&format!("{prefix}.U"), 4 * h, h)?,
        b: lines.tensor(&format!("{prefix}.b"), 1, 4 * h)?,
    })
}

/// Parses a checkpoint; `path` is only used in error messages.
pub fn read_checkpoint(text: &str, path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut lines = Lines {
        path: path.as_ref().to_path_buf(),
        iter: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next()?;
    if magic != MAGIC {
        return Err(Error::Incompatible(format!(
            "{}: not a checkpoint (first line {magic:?})",
            lines.path.display()
        )));
    }
    let kind = lines.key("kind")?;
    if kind != "bilstm" && kind != "lr" {
        return Err(Error::Incompatible(format!("unknown checkpoint kind {kind:?}")));
    }
    let hash = lines.key("vocab_hash")?.to_string();
    let vocab_size: usize = lines.parsed("vocab_size")?;
    let min_count: u64 = lines.parsed("min_count")?;
    let mut preprocess = PreprocessConfig::default();
    let flags = lines.key("preprocess")?;
    let mut seen = 0;
    for item in flags.split(' ').filter(|t| !t.is_empty()) {
        let parsed = item.split_once('=').and_then(|(k, v)| {
            let idx = PREPROCESS_FLAGS.iter().position(|n| *n == k)?;
            Some((idx, v.parse::<bool>().ok()?))
        });
        let (idx, value) = parsed.ok_or_else(|| lines.err(format!("invalid preprocess flag {item:?}")))?;
        *preprocess_flags(&mut preprocess)[idx] = value;
        seen += 1;
    }
    if seen != PREPROCESS_FLAGS.len() {
        return Err(lines.err("preprocess line must list every flag"));
    }
    let settings = if kind == "bilstm" {
        let max_len: usize = lines.parsed("max_sequence_length")?;
        let trainable: bool = lines.parsed("trainable_embedding")?;
        (max_len, trainable, String::new())
    } else {
        (0, false, lines.key("trained_on")?.to_string())
    };
    lines.key("vocab")?;
    let mut tokens = Vec::with_capacity(vocab_size);
    let mut counts = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        let l = lines.next()?;
        let (tok, count) = l
            .rsplit_once(' ')
            .ok_or_else(|| lines.err(format!("expected \"<token> <count>\", found {l:?}")))?;
        let count: u64 = count
            .parse()
            .map_err(|_| lines.err(format!("invalid count {count:?}")))?;
        tokens.push(tok.to_string());
        counts.push(count);
    }
    let vocab = Vocabulary::from_tokens(tokens, counts, min_count)
        .map_err(|tok| lines.err(format!("duplicate token {tok:?}")))?;
    if vocab.content_hash() != hash {
        return Err(Error::Incompatible(format!(
            "vocabulary hash mismatch: header says {hash}, contents hash to {}",
            vocab.content_hash()
        )));
    }

    let dim = lines
        .peek_cols()
        .ok_or_else(|| lines.err("missing embedding tensor"))?;
    let ckpt = if kind == "bilstm" {
        let embedding = lines.matrix("embedding", vocab_size + 1, dim)?;
        let h = lines
            .peek_rows()
            .map(|r| r / 4)
            .ok_or_else(|| lines.err("missing forward.W"))?;
        let forward = lstm(&mut lines, "forward", dim, h)?;
        let backward = lstm(&mut lines, "backward", dim, h)?;
        let f = lines
            .peek_rows()
            .ok_or_else(|| lines.err("missing dense1.W"))?;
        let dense1 = Dense {
            weights: lines.matrix("dense1.W", f, 2 * h)?,
            bias: lines.tensor("dense1.b", 1, f)?,
        };
        let dense2 = Dense {
            weights: lines.matrix("dense2.W", 1, f)?,
            bias: lines.tensor("dense2.b", 1, 1)?,
        };
        let (max_len, trainable, _) = settings;
        Classifier::BiLstm(BiLstmModel::from_parts(
            vocab, embedding, trainable, forward, backward, dense1, dense2, max_len,
        )?)
    } else {
        let table = lines.tensor("embedding", vocab_size, dim)?;
        let embeddings = EmbeddingMatrix::new(vocab, dim, table)?;
        let weights = lines.tensor("lr.w", 1, dim)?;
        let bias = lines.tensor("lr.b", 1, 1)?[0];
        Classifier::LogReg {
            model: LogRegModel {
                weights,
                bias,
                trained_on: settings.2,
            },
            embeddings,
        }
    };
    lines.key("end")?;
    Ok(Checkpoint {
        classifier: ckpt,
        preprocess,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;

    fn embeddings() -> EmbeddingMatrix {
        let vocab = Vocabulary::from_tokens(
            vec!["alpha".into(), "beta".into(), "gamma".into()],
            vec![9, 4, 4],
            2,
        )
        .unwrap();
        let vectors = vec![0.1, -0.2, 1e-300, 3.5, -0.0, 1.0 / 3.0];
        EmbeddingMatrix::new(vocab, 2, vectors).unwrap()
    }

    fn bilstm() -> BiLstmModel {
        let cfg = ModelConfig {
            hidden_size: 3,
            dense1_size: 2,
            max_sequence_length: 7,
            trainable_embedding: false,
        };
        BiLstmModel::new(&embeddings(), &cfg, 5).unwrap()
    }

    fn bilstm_ckpt() -> Checkpoint {
        Checkpoint {
            classifier: Classifier::BiLstm(bilstm()),
            preprocess: PreprocessConfig {
                lowercase: false,
                strip_mentions: false,
                ..Default::default()
            },
        }
    }

    fn round_trip(ckpt: &Checkpoint) -> Checkpoint {
        let mut buf = Vec::new();
        write_checkpoint(ckpt, &mut buf).unwrap();
        read_checkpoint(std::str::from_utf8(&buf).unwrap(), "mem").unwrap()
    }

    fn bits(m: &BiLstmModel) -> Vec<u64> {
        let mut m = m.clone();
        let mut out: Vec<u64> = m.embedding.as_slice().iter().map(|x| x.to_bits()).collect();
        for g in m.parameter_groups_mut() {
            out.extend(g.values.iter().map(|x| x.to_bits()));
        }
        out
    }

    #[test]
    fn bilstm_round_trip_is_lossless() {
        let ckpt = bilstm_ckpt();
        let back = round_trip(&ckpt);
        assert_eq!(back, ckpt);
        let (Classifier::BiLstm(a), Classifier::BiLstm(b)) = (&ckpt.classifier, &back.classifier) else {
            panic!("kind changed");
        };
        assert_eq!(bits(a), bits(b));
        assert_eq!(b.config(), a.config());
    }

    #[test]
    fn logreg_round_trip_is_lossless() {
        let ckpt = Checkpoint {
            classifier: Classifier::LogReg {
                model: LogRegModel {
                    weights: vec![0.25, -1e-17],
                    bias: 0.1 + 0.2,
                    trained_on: "combined-balanced".into(),
                },
                embeddings: embeddings(),
            },
            preprocess: PreprocessConfig::default(),
        };
        assert_eq!(round_trip(&ckpt), ckpt);
        assert_eq!(round_trip(&ckpt).vocab().counts(), &[9, 4, 4]);
    }

    #[test]
    fn tampered_vocabulary_is_incompatible() {
        let mut buf = Vec::new();
        write_checkpoint(&bilstm_ckpt(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\nbeta 4\n", "\ndelta 4\n");
        assert!(matches!(read_checkpoint(&text, "x"), Err(Error::Incompatible(_))));
    }

    #[test]
    fn embedding_hash_check() {
        let ckpt = bilstm_ckpt();
        ckpt.check_embeddings(&embeddings()).unwrap();
        let other = Vocabulary::from_tokens(vec!["alpha".into()], vec![1], 1).unwrap();
        let other = EmbeddingMatrix::new(other, 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(ckpt.check_embeddings(&other), Err(Error::Incompatible(_))));
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(read_checkpoint("hello\n", "x"), Err(Error::Incompatible(_))));
        let mut buf = Vec::new();
        write_checkpoint(&bilstm_ckpt(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated = &text[..text.len() / 2];
        assert!(matches!(read_checkpoint(truncated, "x"), Err(Error::Parse { .. })));
        let no_end = text.replace("end\n", "");
        assert!(matches!(read_checkpoint(&no_end, "x"), Err(Error::Parse { .. })));
    }
}
