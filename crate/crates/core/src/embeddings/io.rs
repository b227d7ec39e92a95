//! word2vec/GloVe text format.
//!
//! ```text
//! <vocab_size> <dim>          (optional header)
//! <token> <x_1> ... <x_dim>   (one line per word)
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a save/load round trip is exact.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EmbeddingMatrix, Vocabulary};
use crate::numfmt::Shortest;
use crate::error::{Error, Result};

pub fn write_embeddings<W: Write>(emb: &EmbeddingMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", emb.len(), emb.dim())?;
    for id in 0..emb.len() {
        out.write_all(emb.vocab().token(id).as_bytes())?;
        for x in emb.row(id) {
            write!(out, " {}", Shortest(*x))?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_embeddings(emb: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(emb, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split(' ').filter(|f| !f.is_empty());
    let n = fields.next()?.parse().ok()?;
    let dim = fields.next()?.parse().ok()?;
    fields.next().is_none().then_some((n, dim))
}

/// Parses embeddings from `reader`; `path` is only used in error messages.
/// Both headered and headerless files are accepted. Without a header the
/// dimension is taken from the first row.
pub fn read_embeddings<R: BufRead>(reader: R, path: &Path) -> Result<EmbeddingMatrix> {
    let mut header: Option<(usize, usize)> = None;
    let mut dim: Option<usize> = None;
    let mut tokens = Vec::new();
    let mut seen = HashSet::new();
    let mut vectors = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if idx == 0 {
            if let Some(h) = parse_header(line) {
                header = Some(h);
                dim = Some(h.1);
                continue;
            }
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let token = fields.next().expect("non-blank line has a field");
        let row_start = vectors.len();
        for field in fields {
            let x: f64 = field.parse().map_err(|_| {
                Error::parse(path, lineno, format!("non-numeric value {field:?}"))
            })?;
            if !x.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value {field:?}")));
            }
            vectors.push(x);
        }
        let width = vectors.len() - row_start;
        let expected = *dim.get_or_insert(width);
        if width != expected || width == 0 {
            return Err(Error::parse(
                path,
                lineno,
                format!("ragged row: expected {expected} values, found {width}"),
            ));
        }
        if !seen.insert(token.to_owned()) {
            return Err(Error::parse(path, lineno, format!("duplicate token {token:?}")));
        }
        tokens.push(token.to_owned());
    }

    if let Some((n, _)) = header {
        if n != tokens.len() {
            return Err(Error::parse(
                path,
                1,
                format!("header declares {n} words, file has {}", tokens.len()),
            ));
        }
    }
    let dim = match dim {
        Some(d) if !tokens.is_empty() => d,
        _ => return Err(Error::parse(path, 1, "no vectors in file")),
    };
    let counts = vec![0; tokens.len()];
    let vocab = Vocabulary::from_tokens(tokens, counts, 0).expect("duplicates rejected above");
    EmbeddingMatrix::new(vocab, dim, vectors)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), path)
}
