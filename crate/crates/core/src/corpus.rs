//! Noise removal and tokenization for social-media text.
//!
//! Only noise is removed. Spelling is never corrected and nothing is stemmed,
//! so deliberately obfuscated words (`fck`, `f**k`, `white_privilege`) reach
//! the embedding and classifier stages verbatim.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").unwrap());
// A mention starts at the beginning of the text or after a non-word character,
// so `f@ck` survives while `.@user` does not.
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|[^\w])@\w+").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#(\w)").unwrap());

/// Independent noise-removal switches. `Default` enables all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub strip_mentions: bool,
    /// Drop the `#` of a hashtag but keep its word.
    pub strip_hashtag_symbol: bool,
    /// Replace every character that is not alphanumeric, `_`, `*` or
    /// whitespace with a token boundary. Apostrophes are deleted instead so
    /// contractions stay one token. Tokens left without any alphanumeric
    /// character are dropped.
    pub strip_punctuation: bool,
    /// Collapse whitespace runs in [`normalize`] output. Tokens are always
    /// split on whitespace, so this flag does not change [`preprocess`].
    pub collapse_whitespace: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_urls: true,
            strip_mentions: true,
            strip_hashtag_symbol: true,
            strip_punctuation: true,
            collapse_whitespace: true,
        }
    }
}

/// An ordered list of non-empty, whitespace-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence by splitting on whitespace, which upholds the
    /// non-empty / whitespace-free invariant by construction.
    pub fn from_whitespace(text: &str) -> Self {
        TokenSequence(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{02BC}')
}

fn is_kept(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '*' || c.is_whitespace()
}

/// Applies the configured noise removal and returns the cleaned text.
pub fn normalize(text: &str, cfg: &PreprocessConfig) -> String {
    let mut out = text.to_owned();
    if cfg.strip_urls {
        out = URL.replace_all(&out, " ").into_owned();
    }
    if cfg.strip_mentions {
        out = MENTION.replace_all(&out, "$1 ").into_owned();
    }
    if cfg.strip_hashtag_symbol {
        out = HASHTAG.replace_all(&out, "$1").into_owned();
    }
    if cfg.lowercase {
        out = out.to_lowercase();
    }
    if cfg.strip_punctuation {
        out = out
            .chars()
            .filter(|&c| !is_apostrophe(c))
            .map(|c| if is_kept(c) { c } else { ' ' })
            .collect::<String>()
            .split_whitespace()
            .filter(|tok| tok.chars().any(char::is_alphanumeric))
            .collect::<Vec<_>>()
            .join(" ");
    }
    if cfg.collapse_whitespace {
        out = out.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    out
}

pub fn preprocess(text: &str, cfg: &PreprocessConfig) -> TokenSequence {
    TokenSequence::from_whitespace(&normalize(text, cfg))
}

/// Reads a plain-text corpus (one document per line, UTF-8) and preprocesses
/// every line. Blank documents are kept as empty sequences.
pub fn read_corpus(path: &Path, cfg: &PreprocessConfig) -> Result<Vec<TokenSequence>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => {
                Error::parse(path, idx as u64 + 1, "line is not valid UTF-8")
            }
            _ => Error::io(path, e),
        })?;
        docs.push(preprocess(&line, cfg));
    }
    Ok(docs)
}
