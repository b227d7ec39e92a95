use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

/// Token <-> id map with corpus frequencies.
///
/// Ids are assigned by descending count, ties broken by the token's byte
/// order, so the same corpus always yields the same ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens in id order. Returns the offending
    /// token if it occurs twice.
    pub fn from_tokens(
        tokens: Vec<String>,
        counts: Vec<u64>,
        min_count: u64,
    ) -> std::result::Result<Self, String> {
        assert_eq!(tokens.len(), counts.len());
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(tok.clone());
            }
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token: tokens,
            counts,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// SHA-256 over the tokens in id order, newline-terminated, as hex.
    /// Two vocabularies with the same hash assign the same ids.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for tok in &self.id_to_token {
            hasher.update(tok.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Counts every token of the corpus and keeps those seen at least
/// `min_count` times.
pub fn build_vocab<'a, I>(corpus: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    let mut counts: HashMap<&'a str, u64> = HashMap::new();
    let mut total = 0u64;
    for doc in corpus {
        for tok in doc {
            *counts.entry(tok.as_str()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let (tokens, counts): (Vec<String>, Vec<u64>) =
        kept.into_iter().map(|(t, c)| (t.to_owned(), c)).unzip();
    Ok(Vocabulary::from_tokens(tokens, counts, min_count).expect("counted tokens are unique"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::from_whitespace(s)
    }

    fn as_map(v: &Vocabulary) -> Vec<(String, u64)> {
        (0..v.len()).map(|i| (v.token(i).to_owned(), v.count(i))).collect()
    }

    #[test]
    fn counts_and_threshold() {
        let corpus = [seq("a b a")];
        let v = build_vocab(&corpus, 1).unwrap();
        assert_eq!(as_map(&v), [("a".into(), 2), ("b".into(), 1)]);
        let v = build_vocab(&corpus, 2).unwrap();
        assert_eq!(as_map(&v), [("a".into(), 2)]);
    }

    #[test]
    fn counting_oracle_on_repeated_lines() {
        let corpus: Vec<_> = (0..1000).map(|_| seq("x y z")).collect();
        let v = build_vocab(&corpus, 1).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.counts().iter().all(|&c| c == 1000));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus: [TokenSequence; 0] = [];
        assert!(matches!(build_vocab(&corpus, 1), Err(Error::EmptyCorpus)));
        assert!(matches!(
            build_vocab(&[seq("")], 1),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn ids_are_a_bijection() {
        let corpus = [seq("the cat sat on the mat the end")];
        let v = build_vocab(&corpus, 1).unwrap();
        for id in 0..v.len() {
            assert_eq!(v.id(v.token(id)), Some(id));
        }
        assert_eq!(v.token(0), "the");
        assert!(v.id("dog").is_none());
    }

    #[test]
    fn duplicate_tokens_rejected() {
        let err = Vocabulary::from_tokens(vec!["a".into(), "a".into()], vec![0, 0], 0);
        assert_eq!(err.unwrap_err(), "a");
    }

    #[test]
    fn hash_depends_on_order() {
        let a = Vocabulary::from_tokens(vec!["x".into(), "y".into()], vec![1, 1], 0).unwrap();
        let b = Vocabulary::from_tokens(vec!["y".into(), "x".into()], vec![1, 1], 0).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
