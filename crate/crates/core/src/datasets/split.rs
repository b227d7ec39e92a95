//! Balancing and train/test splitting.
//!
//! Every random choice goes through [`SplitMix64`] so the procedures can be
//! reproduced exactly by other tools:
//!
//! **split** (`labels`, `fraction`, `seed`, `stratified`)
//! 1. `rng = SplitMix64(seed)`.
//! 2. Stratified: for class 0 then class 1, take that class's indices in
//!    ascending order, shuffle them, put the first
//!    `floor(len * fraction + 0.5)` into test and the rest into train.
//!    Unstratified: the same on the single list `0..n`.
//! 3. Shuffle train, then shuffle test.
//!
//! **combine and balance** (`datasets`, `seed`)
//! 1. Concatenate the datasets in order; `m` = size of the smaller class.
//! 2. `rng = SplitMix64(seed)`. For class 0 then class 1: if the class has
//!    more than `m` members, shuffle its indices (ascending order first)
//!    and keep the first `m`.
//! 3. Concatenate the class-0 selection and the class-1 selection, then
//!    shuffle it.

use super::LabeledExample;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

fn class_indices(labels: &[u8], class: u8) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == class)
        .map(|(i, _)| i)
        .collect()
}

fn test_count(len: usize, fraction: f64) -> usize {
    ((len as f64 * fraction + 0.5).floor() as usize).min(len)
}

/// Splits positions `0..labels.len()` into (train, test).
pub fn split_indices(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let groups = if stratified {
        vec![class_indices(labels, 0), class_indices(labels, 1)]
    } else {
        vec![(0..labels.len()).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups {
        rng.shuffle(&mut group);
        let n_test = test_count(group.len(), test_fraction);
        test.extend_from_slice(&group[..n_test]);
        train.extend_from_slice(&group[n_test..]);
    }
    rng.shuffle(&mut train);
    rng.shuffle(&mut test);
    Ok((train, test))
}

/// Train/test split with per-class proportions preserved.
pub fn stratified_split(
    data: &[LabeledExample],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    train_test_split(data, test_fraction, seed, true)
}

pub fn train_test_split(
    data: &[LabeledExample],
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    let labels: Vec<u8> = data.iter().map(|e| e.label).collect();
    let (train, test) = split_indices(&labels, test_fraction, seed, stratified)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| data[i].clone()).collect();
    Ok((pick(train), pick(test)))
}

/// Concatenates `datasets` and undersamples the larger class so both
/// classes end up with the size of the smaller one.
pub fn combine_and_balance(
    datasets: &[Vec<LabeledExample>],
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    let all: Vec<&LabeledExample> = datasets.iter().flatten().collect();
    let labels: Vec<u8> = all.iter().map(|e| e.label).collect();
    let mut classes = [class_indices(&labels, 0), class_indices(&labels, 1)];
    let m = classes[0].len().min(classes[1].len());
    if m == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut rng = SplitMix64::new(seed);
    for class in classes.iter_mut() {
        if class.len() > m {
            rng.shuffle(class);
            class.truncate(m);
        }
    }
    let mut chosen: Vec<usize> = classes.concat();
    rng.shuffle(&mut chosen);
    Ok(chosen.into_iter().map(|i| all[i].clone()).collect())
}
