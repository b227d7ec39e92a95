use std::collections::BTreeMap;

use super::{collapse_labels, AnnotationRecord, FourLabel};
use crate::error::{Error, Result};

/// Cohen's kappa with its observed and chance agreement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResult {
    /// `p_o`: fraction of items labelled identically.
    pub observed: f64,
    /// `p_e`: agreement expected from the two marginal distributions.
    pub expected: f64,
    pub kappa: f64,
}

/// `kappa = (p_o - p_e) / (1 - p_e)`. When both raters use one and the same
/// label throughout (`p_e = 1`), kappa is defined as 1.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<KappaResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = a.len() as f64;
    let mut marginals: BTreeMap<&T, (u64, u64)> = BTreeMap::new();
    let mut agree = 0u64;
    for (x, y) in a.iter().zip(b) {
        marginals.entry(x).or_default().0 += 1;
        marginals.entry(y).or_default().1 += 1;
        if x == y {
            agree += 1;
        }
    }
    let observed = agree as f64 / n;
    let expected: f64 = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    let kappa = if expected >= 1.0 {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(KappaResult {
        observed,
        expected,
        kappa,
    })
}

/// Label alphabet used when comparing annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMap {
    /// The four annotation labels as-is.
    #[default]
    Four,
    /// Collapsed to white supremacist / not.
    Binary,
}

impl LabelMap {
    fn apply(self, l: FourLabel) -> u8 {
        match self {
            LabelMap::Four => l as u8,
            LabelMap::Binary => collapse_labels(l),
        }
    }
}

/// Kappa for annotator pairs (1,2), (2,3) and (1,3), in that order.
pub fn pairwise_kappa(records: &[AnnotationRecord], map: LabelMap) -> Result<[KappaResult; 3]> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let column = |k: usize| -> Vec<u8> { records.iter().map(|r| map.apply(r.labels[k])).collect() };
    let (a1, a2, a3) = (column(0), column(1), column(2));
    Ok([
        cohen_kappa(&a1, &a2)?,
        cohen_kappa(&a2, &a3)?,
        cohen_kappa(&a1, &a3)?,
    ])
}

/// Mean of the three pairwise kappas.
pub fn average_pairwise_kappa(records: &[AnnotationRecord], map: LabelMap) -> Result<f64> {
    let pairs = pairwise_kappa(records, map)?;
    Ok(pairs.iter().map(|k| k.kappa).sum::<f64>() / 3.0)
}
