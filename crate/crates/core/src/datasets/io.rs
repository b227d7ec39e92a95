//! CSV readers and writers for labeled and annotated data.
//!
//! Schemas (UTF-8, header row required):
//!
//! * labeled: `text,label`
//! * annotations: `text,ann1,ann2,ann3`, labels from [`FourLabel::token`]
//! * rejects: the input schema plus a trailing `reason` column
//!
//! The `read_*` functions collect malformed rows as [`Reject`]s; the `load_*`
//! functions fail on the first one.

use std::fs;
use std::path::{Path, PathBuf};

use super::{AnnotationRecord, FourLabel, LabeledExample, Source};
use crate::error::{Error, Result};

/// Maps raw label tokens to binary labels. Matching is case-insensitive
/// after trimming.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    /// Tokens whose rows are dropped without being rejected.
    pub skip: Vec<String>,
}

impl Default for LabelMapping {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        LabelMapping {
            positive: v(&["1", "hate"]),
            negative: v(&["0", "nohate"]),
            skip: v(&["skip", "idk/skip", "relation"]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapped {
    Label(u8),
    Skip,
}

impl LabelMapping {
    pub fn map(&self, token: &str) -> Option<Mapped> {
        let t = token.trim();
        let hit = |set: &[String]| set.iter().any(|s| s.eq_ignore_ascii_case(t));
        if hit(&self.positive) {
            Some(Mapped::Label(1))
        } else if hit(&self.negative) {
            Some(Mapped::Label(0))
        } else if hit(&self.skip) {
            Some(Mapped::Skip)
        } else {
            None
        }
    }
}

/// A row that failed validation, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: u64,
    pub fields: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
    /// Rows dropped because their label is in the skip set.
    pub skipped: usize,
}

impl<T> Loaded<T> {
    fn strict(self, path: &Path) -> Result<Vec<T>> {
        match self.rejects.into_iter().next() {
            Some(r) => Err(Error::parse(path, r.line, r.reason)),
            None => Ok(self.records),
        }
    }
}

const LABELED_HEADER: [&str; 2] = ["text", "label"];
const ANNOTATION_HEADER: [&str; 4] = ["text", "ann1", "ann2", "ann3"];

type Row = (u64, Result<Vec<String>, String>);

/// Reads every row after the header. `None` for an empty file.
fn read_rows(path: &Path, header: &[&str]) -> Result<Option<Vec<Row>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut records = rdr.records();
    let first = match records.next() {
        None => return Ok(None),
        Some(Ok(r)) => r,
        Some(Err(e)) => return Err(Error::parse(path, 1, format!("unreadable header: {e}"))),
    };
    let got: Vec<String> = first
        .iter()
        .map(|f| f.trim_start_matches('\u{feff}').trim().to_ascii_lowercase())
        .collect();
    if got != header {
        return Err(Error::parse(
            path,
            1,
            format!("expected header {:?}, found {:?}", header.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in records {
        match rec {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line());
                rows.push((line, Ok(r.iter().map(str::to_string).collect())));
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                match e.kind() {
                    csv::ErrorKind::Utf8 { .. } => rows.push((line, Err("invalid UTF-8".into()))),
                    _ => return Err(Error::parse(path, line, e.to_string())),
                }
            }
        }
    }
    Ok(Some(rows))
}

fn width_error(fields: &[String], want: usize) -> Option<String> {
    (fields.len() != want).then(|| format!("expected {want} columns, found {}", fields.len()))
}

/// Lenient reader for the `text,label` schema.
pub fn read_labeled_csv(
    path: impl AsRef<Path>,
    mapping: &LabelMapping,
    source: Source,
) -> Result<Loaded<LabeledExample>> {
    let path = path.as_ref();
    let mut out = Loaded {
        records: Vec::new(),
        rejects: Vec::new(),
        skipped: 0,
    };
    for (line, row) in read_rows(path, &LABELED_HEADER)?.unwrap_or_default() {
        let fields = match row {
            Ok(f) => f,
            Err(reason) => {
                out.rejects.push(Reject { line, fields: vec![], reason });
                continue;
            }
        };
        if let Some(reason) = width_error(&fields, 2) {
            out.rejects.push(Reject { line, fields, reason });
            continue;
        }
        match mapping.map(&fields[1]) {
            Some(Mapped::Label(label)) => out.records.push(LabeledExample {
                text: fields[0].clone(),
                label,
                source,
            }),
            Some(Mapped::Skip) => out.skipped += 1,
            None => {
                let reason = format!("unknown label {:?}", fields[1]);
                out.rejects.push(Reject { line, fields, reason });
            }
        }
    }
    Ok(out)
}

/// Strict reader for the `text,label` schema.
pub fn load_labeled_csv(
    path: impl AsRef<Path>,
    mapping: &LabelMapping,
    source: Source,
) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    read_labeled_csv(path, mapping, source)?.strict(path)
}

/// Lenient reader for the `text,ann1,ann2,ann3` schema.
pub fn read_annotations_csv(path: impl AsRef<Path>) -> Result<Loaded<AnnotationRecord>> {
    let path = path.as_ref();
    let mut out = Loaded {
        records: Vec::new(),
        rejects: Vec::new(),
        skipped: 0,
    };
    for (line, row) in read_rows(path, &ANNOTATION_HEADER)?.unwrap_or_default() {
        let fields = match row {
            Ok(f) => f,
            Err(reason) => {
                out.rejects.push(Reject { line, fields: vec![], reason });
                continue;
            }
        };
        if let Some(reason) = width_error(&fields, 4) {
            out.rejects.push(Reject { line, fields, reason });
            continue;
        }
        let parsed: Result<Vec<FourLabel>, String> = fields[1..]
            .iter()
            .map(|t| t.parse::<FourLabel>())
            .collect();
        match parsed {
            Ok(l) => out.records.push(AnnotationRecord {
                text: fields[0].clone(),
                labels: [l[0], l[1], l[2]],
            }),
            Err(msg) => {
                let reason = msg;
                out.rejects.push(Reject { line, fields, reason });
            }
        }
    }
    Ok(out)
}

/// Strict reader for the `text,ann1,ann2,ann3` schema.
pub fn load_annotations_csv(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    read_annotations_csv(path)?.strict(path)
}

/// Reads the public Stormfront layout: `annotations_metadata.csv` (columns
/// `file_id` and `label`, others ignored) plus one `all_files/<file_id>.txt`
/// per sentence. Labels in the mapping's skip set are dropped.
pub fn load_stormfront(dir: impl AsRef<Path>, mapping: &LabelMapping) -> Result<Loaded<LabeledExample>> {
    let dir = dir.as_ref();
    let meta = dir.join("annotations_metadata.csv");
    let bytes = fs::read(&meta).map_err(|e| Error::io(&meta, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(bytes.as_slice());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(&meta, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_ascii_lowercase())
        .collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(&meta, 1, format!("missing column {name:?}")))
    };
    let (id_col, label_col) = (col("file_id")?, col("label")?);
    let mut out = Loaded {
        records: Vec::new(),
        rejects: Vec::new(),
        skipped: 0,
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(&meta, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        let (Some(id), Some(label)) = (fields.get(id_col), fields.get(label_col)) else {
            let reason = "missing file_id or label".to_string();
            out.rejects.push(Reject { line, fields, reason });
            continue;
        };
        let label = match mapping.map(label) {
            Some(Mapped::Label(l)) => l,
            Some(Mapped::Skip) => {
                out.skipped += 1;
                continue;
            }
            None => {
                let reason = format!("unknown label {label:?}");
                out.rejects.push(Reject { line, fields, reason });
                continue;
            }
        };
        let text_path: PathBuf = dir.join("all_files").join(format!("{}.txt", id.trim()));
        match fs::read_to_string(&text_path) {
            Ok(text) => out.records.push(LabeledExample {
                text: text.trim().to_string(),
                label,
                source: Source::Stormfront,
            }),
            Err(e) => {
                let reason = format!("{}: {e}", text_path.display());
                out.rejects.push(Reject { line, fields, reason });
            }
        }
    }
    Ok(out)
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(header).map_err(|e| csv_io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_labeled_csv(path: impl AsRef<Path>, data: &[LabeledExample]) -> Result<()> {
    write_csv(
        path.as_ref(),
        &LABELED_HEADER,
        data.iter().map(|e| vec![e.text.clone(), e.label.to_string()]),
    )
}

fn reject_row(r: &Reject, width: usize) -> Vec<String> {
    let mut row = r.fields.clone();
    row.resize(width, String::new());
    row.push(if r.line > 0 {
        format!("line {}: {}", r.line, r.reason)
    } else {
        r.reason.clone()
    });
    row
}

/// Writes rejects from the labeled schema as `text,label,reason`; short
/// rows are padded and long rows truncated to the schema width. The reason
/// starts with the input line number when it is known.
pub fn write_labeled_rejects(path: impl AsRef<Path>, rejects: &[Reject]) -> Result<()> {
    write_csv(
        path.as_ref(),
        &["text", "label", "reason"],
        rejects.iter().map(|r| reject_row(r, 2)),
    )
}

/// Writes rejects from the annotation schema as `text,ann1,ann2,ann3,reason`.
pub fn write_annotation_rejects(path: impl AsRef<Path>, rejects: &[Reject]) -> Result<()> {
    write_csv(
        path.as_ref(),
        &["text", "ann1", "ann2", "ann3", "reason"],
        rejects.iter().map(|r| reject_row(r, 4)),
    )
}

impl Reject {
    /// A well-formed annotation row with no majority label.
    pub fn undecidable(record: &AnnotationRecord) -> Self {
        let mut fields = vec![record.text.clone()];
        fields.extend(record.labels.iter().map(|l| l.token().to_string()));
        Reject {
            line: 0,
            fields,
            reason: "undecidable: three-way tie".into(),
        }
    }
}
