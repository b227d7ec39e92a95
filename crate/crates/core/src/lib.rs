//! Detecting white-supremacist hate speech with domain-specific word
//! embeddings and a bidirectional LSTM.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] cleans raw posts into token sequences,
//! * [`embeddings`] trains CBOW word vectors and answers similarity queries,
//! * [`nn`] is a BiLSTM binary classifier with hand-written backpropagation
//!   and Adam,
//! * [`baseline`] is logistic regression over averaged embeddings,
//! * [`datasets`] aggregates annotations, measures agreement, balances and
//!   splits labeled data,
//! * [`eval`] computes the metrics and renders report tables.

pub mod baseline;
pub mod checkpoint;
pub mod corpus;
pub mod datasets;
pub mod embeddings;
mod error;
pub mod eval;
pub mod nn;
mod numfmt;
pub mod rng;

pub use error::{Error, Result};
