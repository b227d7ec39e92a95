//! Binary classification metrics and report tables.
//!
//! The positive class is label 1. Ratios whose denominator is zero are
//! reported as 0 and flagged rather than NaN.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Probabilities at or above this are predicted as class 1.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn check_binary(xs: &[u8]) -> Result<()> {
    match xs.iter().find(|&&x| x > 1) {
        Some(x) => Err(Error::InvalidConfig(format!("binary label expected, got {x}"))),
        None => Ok(()),
    }
}

fn check_pair<A>(a: &[A], b: &[u8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_binary(b)
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionCounts> {
    check_pair(preds, labels)?;
    check_binary(preds)?;
    let mut c = ConfusionCounts::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// `num / den`, or `(0, true)` when `den` is zero.
fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

pub fn prf1(c: &ConfusionCounts) -> Prf1 {
    let (precision, precision_undefined) = ratio(c.tp as f64, (c.tp + c.fp) as f64);
    let (recall, recall_undefined) = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    let (f1, f1_undefined) = ratio(2.0 * precision * recall, precision + recall);
    Prf1 {
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    }
}

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half. Computed from average
/// ranks in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_pair(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 1-based ranks of the positives, ties sharing their mean rank.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += mean_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassAccuracy {
    /// Recall of class 1.
    pub hate: f64,
    /// Recall of class 0.
    pub nonhate: f64,
    pub accuracy: f64,
    pub hate_undefined: bool,
    pub nonhate_undefined: bool,
}

pub fn per_class_accuracy(preds: &[u8], labels: &[u8]) -> Result<ClassAccuracy> {
    let c = confusion(preds, labels)?;
    let (hate, hate_undefined) = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    let (nonhate, nonhate_undefined) = ratio(c.tn as f64, (c.tn + c.fp) as f64);
    Ok(ClassAccuracy {
        hate,
        nonhate,
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        hate_undefined,
        nonhate_undefined,
    })
}

/// One row of a results table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub model_id: String,
    pub dataset_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub accuracy_hate: f64,
    pub accuracy_nonhate: f64,
    pub accuracy: f64,
    /// Names of metrics that were undefined and reported as 0.
    pub undefined: Vec<&'static str>,
}

/// Scores probabilities against labels, thresholding at
/// [`DECISION_THRESHOLD`] for everything except AUC.
pub fn evaluate(model_id: &str, dataset_id: &str, scores: &[f64], labels: &[u8]) -> Result<EvalReport> {
    check_pair(scores, labels)?;
    let preds: Vec<u8> = scores
        .iter()
        .map(|&s| u8::from(s >= DECISION_THRESHOLD))
        .collect();
    let c = confusion(&preds, labels)?;
    let m = prf1(&c);
    let acc = per_class_accuracy(&preds, labels)?;
    let mut undefined = Vec::new();
    for (flag, name) in [
        (m.precision_undefined, "precision"),
        (m.recall_undefined, "recall"),
        (m.f1_undefined, "f1"),
    ] {
        if flag {
            undefined.push(name);
        }
    }
    let auc = match roc_auc(scores, labels) {
        Ok(a) => a,
        Err(Error::AucUndefined) => {
            undefined.push("auc");
            0.0
        }
        Err(e) => return Err(e),
    };
    if acc.hate_undefined {
        undefined.push("accuracy_hate");
    }
    if acc.nonhate_undefined {
        undefined.push("accuracy_nonhate");
    }
    Ok(EvalReport {
        model_id: model_id.to_string(),
        dataset_id: dataset_id.to_string(),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        auc,
        accuracy_hate: acc.hate,
        accuracy_nonhate: acc.nonhate,
        accuracy: acc.accuracy,
        undefined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "Method",
    "Dataset",
    "Precision",
    "Recall",
    "F1-score",
    "AUC",
    "Accuracy(Hate)",
    "Accuracy(non-Hate)",
    "Accuracy",
];

impl EvalReport {
    fn cells(&self) -> [String; 9] {
        let f = |x: f64| format!("{x:.5}");
        [
            self.model_id.clone(),
            self.dataset_id.clone(),
            f(self.precision),
            f(self.recall),
            f(self.f1),
            f(self.auc),
            f(self.accuracy_hate),
            f(self.accuracy_nonhate),
            f(self.accuracy),
        ]
    }
}

/// Renders reports as CSV (header plus one line per report) or as a
/// markdown table. Undefined metrics are listed under the markdown table.
pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(REPORT_COLUMNS).expect("in-memory write");
            for r in reports {
                w.write_record(r.cells()).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
            for r in reports {
                let cells = r.cells().map(|c| c.replace('|', "\\|"));
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            let flagged: Vec<_> = reports.iter().filter(|r| !r.undefined.is_empty()).collect();
            if !flagged.is_empty() {
                out.push('\n');
                for r in flagged {
                    let _ = writeln!(
                        out,
                        "Undefined (reported as 0) for {} on {}: {}",
                        r.model_id,
                        r.dataset_id,
                        r.undefined.join(", ")
                    );
                }
            }
            out
        }
    }
}

/// Parses the CSV produced by [`render_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<EvalReport>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let bad = |line: u64, msg: String| Error::parse("<report>", line, msg);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 {
            let header: Vec<&str> = rec.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
            if header != REPORT_COLUMNS {
                return Err(bad(line, format!("unexpected header {header:?}")));
            }
            continue;
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = rec[k]
                .trim()
                .parse()
                .map_err(|_| bad(line, format!("{}: not a number: {:?}", REPORT_COLUMNS[k], &rec[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(line, format!("{}: non-finite value", REPORT_COLUMNS[k])))
            }
        };
        out.push(EvalReport {
            model_id: rec[0].to_string(),
            dataset_id: rec[1].to_string(),
            precision: num(2)?,
            recall: num(3)?,
            f1: num(4)?,
            auc: num(5)?,
            accuracy_hate: num(6)?,
            accuracy_nonhate: num(7)?,
            accuracy: num(8)?,
            undefined: Vec::new(),
        });
    }
    if out.is_empty() && text.trim().is_empty() {
        return Err(bad(1, "missing header".into()));
    }
    Ok(out)
}
