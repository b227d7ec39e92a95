//! Word embeddings: vocabulary, CBOW training, similarity queries and the
//! word2vec/GloVe text format.

mod cbow;
mod io;
mod vocab;

pub use cbow::{
    cbow_pair_gradient, init_input_vectors, train_cbow, train_cbow_with_history, CbowConfig,
    CbowRun, PairGradient, TrainMode,
};
pub use io::{load_embeddings, read_embeddings, save_embeddings, write_embeddings};
pub use vocab::{build_vocab, Vocabulary};

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

/// Dense `|V| x dim` word vectors with their vocabulary. Row `i` belongs to
/// token id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    dim: usize,
    vectors: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(vocab: Vocabulary, dim: usize, vectors: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dim must be >= 1".into()));
        }
        if vectors.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() * dim,
                actual: vectors.len(),
            });
        }
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("embedding contains NaN or Inf".into()));
        }
        Ok(EmbeddingMatrix { vocab, dim, vectors })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.id(token).map(|id| self.row(id))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vectors
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> EmbeddingMatrix {
        EmbeddingMatrix {
            vocab: self.vocab.clone(),
            dim: self.dim,
            vectors: self.vectors.iter().map(|x| x * factor).collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// The `k` tokens closest to `word` by cosine similarity, best first.
///
/// The query itself is excluded and ties go to the lower token id. Rows with
/// zero norm score 0. Asking for more neighbours than exist returns them all.
pub fn most_similar(emb: &EmbeddingMatrix, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let query_id = emb
        .vocab
        .id(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))?;
    let query = emb.row(query_id);
    let query_norm = norm(query);
    if query_norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut scored: Vec<(usize, f64)> = (0..emb.len())
        .filter(|&id| id != query_id)
        .map(|id| {
            let row = emb.row(id);
            let n = norm(row);
            let sim = if n == 0.0 {
                0.0
            } else {
                dot(query, row) / (query_norm * n)
            };
            (id, sim)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(id, sim)| (emb.vocab.token(id).to_owned(), sim))
        .collect())
}

/// Mean of the in-vocabulary token vectors; the zero vector when there are
/// none.
pub fn average_embedding(emb: &EmbeddingMatrix, tokens: &TokenSequence) -> Vec<f64> {
    let mut acc = vec![0.0; emb.dim];
    let mut n = 0usize;
    for id in tokens.iter().filter_map(|t| emb.vocab.id(t)) {
        for (a, x) in acc.iter_mut().zip(emb.row(id)) {
            *a += x;
        }
        n += 1;
    }
    if n > 0 {
        let inv = n as f64;
        acc.iter_mut().for_each(|a| *a /= inv);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(tokens: &[&str], rows: &[&[f64]]) -> EmbeddingMatrix {
        let vocab = Vocabulary::from_tokens(
            tokens.iter().map(|s| s.to_string()).collect(),
            vec![1; tokens.len()],
            0,
        )
        .unwrap();
        let dim = rows[0].len();
        EmbeddingMatrix::new(vocab, dim, rows.concat()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77))
        let v = cosine_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((v - 0.974631846).abs() < 1e-6);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm)
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn most_similar_excludes_query_and_breaks_ties_by_id() {
        let emb = matrix(
            &["q", "b", "a", "c"],
            &[&[1.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[-1.0, 0.0]],
        );
        let all = most_similar(&emb, "q", 3).unwrap();
        let names: Vec<_> = all.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(names, ["b", "a", "c"]);
        assert_eq!(most_similar(&emb, "q", 10).unwrap().len(), 3);
        assert!(matches!(
            most_similar(&emb, "zzz", 1),
            Err(Error::OutOfVocabulary(_))
        ));
    }

    #[test]
    fn average_examples() {
        let emb = matrix(&["a", "b", "c"], &[&[1.0, 2.0], &[-1.0, -2.0], &[4.0, 0.0]]);
        let s = |t: &str| TokenSequence::from_whitespace(t);
        assert_eq!(average_embedding(&emb, &s("a")), [1.0, 2.0]);
        assert_eq!(average_embedding(&emb, &s("a b")), [0.0, 0.0]);
        assert_eq!(average_embedding(&emb, &s("a a c")), [2.0, 4.0 / 3.0]);
        assert_eq!(average_embedding(&emb, &s("oov a")), [1.0, 2.0]);
        assert_eq!(average_embedding(&emb, &s("")), [0.0, 0.0]);
        assert_eq!(average_embedding(&emb, &s("x y")), [0.0, 0.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let vocab = Vocabulary::from_tokens(vec!["a".into()], vec![1], 0).unwrap();
        assert!(EmbeddingMatrix::new(vocab, 1, vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn most_similar_is_scale_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 6),
            factor in 0.01f64..100.0,
        ) {
            let tokens = ["t0", "t1", "t2", "t3", "t4", "t5"];
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let emb = matrix(&tokens, &refs);
            prop_assume!(norm(emb.row(0)) > 1e-3);
            let a = most_similar(&emb, "t0", 5).unwrap();
            let b = most_similar(&emb.scaled(factor), "t0", 5).unwrap();
            let names = |v: &[(String, f64)]| v.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
            // Scaling can perturb the last bits of near-ties; compare scores, then order
            // wherever scores are distinguishable.
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.1 - y.1).abs() < 1e-12);
            }
            let distinct = a.windows(2).all(|w| (w[0].1 - w[1].1).abs() > 1e-9);
            if distinct {
                prop_assert_eq!(names(&a), names(&b));
            }
        }

        #[test]
        fn cosine_is_symmetric_and_bounded(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            prop_assume!(norm(&a) > 1e-6 && norm(&b) > 1e-6);
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
