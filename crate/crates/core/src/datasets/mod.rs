//! Labeled data: annotation aggregation, agreement, balancing and splits.

mod io;
mod kappa;
mod split;

pub use io::{
    load_annotations_csv, load_labeled_csv, load_stormfront, read_annotations_csv,
    read_labeled_csv, write_annotation_rejects, write_labeled_csv, write_labeled_rejects,
    LabelMapping, Loaded, Mapped, Reject,
};
pub use kappa::{average_pairwise_kappa, cohen_kappa, pairwise_kappa, KappaResult, LabelMap};
pub use split::{combine_and_balance, split_indices, stratified_split, train_test_split};

use std::fmt;
use std::str::FromStr;

/// The four-way annotation scheme used for the Twitter data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FourLabel {
    ExplicitWs,
    ImplicitWs,
    OtherHate,
    Neutral,
}

impl FourLabel {
    pub const ALL: [FourLabel; 4] = [
        FourLabel::ExplicitWs,
        FourLabel::ImplicitWs,
        FourLabel::OtherHate,
        FourLabel::Neutral,
    ];

    pub fn token(self) -> &'static str {
        match self {
            FourLabel::ExplicitWs => "explicit_ws",
            FourLabel::ImplicitWs => "implicit_ws",
            FourLabel::OtherHate => "other_hate",
            FourLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for FourLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FourLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FourLabel::ALL
            .into_iter()
            .find(|l| l.token() == s.trim())
            .ok_or_else(|| format!("unknown label {s:?}"))
    }
}

/// Explicit and implicit white supremacy map to 1, everything else to 0.
pub fn collapse_labels(label: FourLabel) -> u8 {
    match label {
        FourLabel::ExplicitWs | FourLabel::ImplicitWs => 1,
        FourLabel::OtherHate | FourLabel::Neutral => 0,
    }
}

/// One text with one label from each of three annotators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub text: String,
    pub labels: [FourLabel; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Stormfront,
    Twitter,
    Synthetic,
}

/// A text with a binary label: 1 = white supremacist, 0 = not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub text: String,
    pub label: u8,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Vote {
    Decided(LabeledExample),
    /// All three annotators disagree (only possible without collapsing).
    Undecidable,
}

/// Majority label of the three annotators.
///
/// With `collapse` the labels are first reduced to binary, so a majority
/// always exists. Without it the majority is taken over the four labels and
/// then collapsed; a three-way split is undecidable.
pub fn majority_vote(record: &AnnotationRecord, collapse: bool) -> Vote {
    let [a, b, c] = record.labels;
    let label = if collapse {
        let ones: u8 = record.labels.iter().map(|&l| collapse_labels(l)).sum();
        u8::from(ones >= 2)
    } else if a == b || a == c {
        collapse_labels(a)
    } else if b == c {
        collapse_labels(b)
    } else {
        return Vote::Undecidable;
    };
    Vote::Decided(LabeledExample {
        text: record.text.clone(),
        label,
        source: Source::Twitter,
    })
}

/// Majority-votes every record, returning decided examples and the records
/// that could not be decided.
pub fn aggregate(
    records: &[AnnotationRecord],
    collapse: bool,
) -> (Vec<LabeledExample>, Vec<AnnotationRecord>) {
    let mut decided = Vec::new();
    let mut ties = Vec::new();
    for r in records {
        match majority_vote(r, collapse) {
            Vote::Decided(ex) => decided.push(ex),
            Vote::Undecidable => ties.push(r.clone()),
        }
    }
    (decided, ties)
}
