use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, ValueEnum};
use wsdetect::datasets::{
    aggregate, combine_and_balance, load_annotations_csv, load_stormfront, pairwise_kappa,
    read_annotations_csv, read_labeled_csv, train_test_split, write_annotation_rejects,
    write_labeled_csv, write_labeled_rejects, LabelMap, LabelMapping, LabeledExample, Reject,
    Source,
};

use crate::manifest::Manifest;
use crate::{exit, manifest_path, output_path, Ctx};

const SECTION_PREPARE: &str = "prepare-data";
const SECTION_KAPPA: &str = "kappa";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Majority-vote a `text,ann1,ann2,ann3` file into `text,label`.
    Aggregate,
    /// Concatenate labeled files and undersample the larger class.
    CombineBalance,
    /// Split one labeled file into train and test parts.
    Split,
}

#[derive(Args, Debug)]
pub struct PrepareDataArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Input CSV; repeat for combine-balance.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    /// Stormfront release directory (annotations_metadata.csv plus
    /// all_files/), added to the combine-balance inputs.
    #[arg(long, value_name = "DIR")]
    stormfront: Option<PathBuf>,
    /// Output file; for split, the prefix of `<out>-train.csv` and
    /// `<out>-test.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Aggregate: collapse the four labels to binary before voting.
    #[arg(long)]
    collapse_first: bool,
    /// Split: held-out fraction [default: 0.2].
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Split: ignore class proportions.
    #[arg(long)]
    unstratified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelMapArg {
    Four,
    Binary,
}

#[derive(Args, Debug)]
pub struct KappaArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, value_enum, default_value = "four")]
    label_map: LabelMapArg,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `dir/stem.rejects.csv` for an output `dir/stem.csv`.
fn rejects_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.rejects.csv"))
}

fn one_input(a: &PrepareDataArgs) -> Result<&Path> {
    match a.inputs.as_slice() {
        [p] => Ok(p),
        other => Err(exit(
            1,
            format!("--mode {:?} takes exactly one --input, got {}", a.mode, other.len()),
        )),
    }
}

/// Moves the line number into the reason so rejects from several files
/// stay traceable.
fn tag_rejects(path: &Path, rejects: Vec<Reject>) -> impl Iterator<Item = Reject> + '_ {
    rejects.into_iter().map(move |r| Reject {
        reason: format!("{}:{}: {}", path.display(), r.line, r.reason),
        line: 0,
        fields: r.fields,
    })
}

fn report_rejects(m: &mut Manifest, n: usize, path: &Path) -> Result<()> {
    m.set("rejects", n);
    m.output("rejects", path)?;
    if n > 0 {
        eprintln!("{n} rejected rows written to {}", path.display());
    }
    Ok(())
}

pub fn prepare_data(ctx: &Ctx, a: PrepareDataArgs) -> Result<()> {
    let s = SECTION_PREPARE;
    let mut m = ctx.manifest(s)?;
    m.set("mode", format!("{:?}", a.mode).to_lowercase());
    for (i, p) in a.inputs.iter().enumerate() {
        m.input(&i.to_string(), p)?;
    }
    let dir = ctx.out_dir(&mut m, s)?;
    let mapping = LabelMapping::default();
    match a.mode {
        Mode::Aggregate => {
            let input = one_input(&a)?;
            let collapse = ctx.resolve(&mut m, s, "collapse-first", a.collapse_first.then_some(true), false)?;
            let out = output_path(a.out.as_deref(), &dir, "aggregated.csv");
            let loaded = read_annotations_csv(input)?;
            let (decided, ties) = aggregate(&loaded.records, collapse);
            let mut rejects = loaded.rejects;
            rejects.extend(ties.iter().map(Reject::undecidable));
            write_labeled_csv(&out, &decided)?;
            let rej = rejects_path(&out);
            write_annotation_rejects(&rej, &rejects)?;
            m.set("rows", decided.len());
            m.output("data", &out)?;
            report_rejects(&mut m, rejects.len(), &rej)?;
            m.write(&manifest_path(&out))?;
        }
        Mode::CombineBalance => {
            let seed = ctx.seed(&mut m, s)?;
            let out = output_path(a.out.as_deref(), &dir, "combined-balanced.csv");
            let mut sets: Vec<Vec<LabeledExample>> = Vec::new();
            let mut rejects = Vec::new();
            if let Some(sf) = &a.stormfront {
                m.set("input.stormfront", sf.display());
                m.input("stormfront.metadata", &sf.join("annotations_metadata.csv"))?;
                let loaded = load_stormfront(sf, &mapping)?;
                rejects.extend(tag_rejects(&sf.join("annotations_metadata.csv"), loaded.rejects));
                sets.push(loaded.records);
            }
            for p in &a.inputs {
                let loaded = read_labeled_csv(p, &mapping, Source::Twitter)?;
                rejects.extend(tag_rejects(p, loaded.rejects));
                sets.push(loaded.records);
            }
            if sets.is_empty() {
                return Err(exit(1, "combine-balance needs at least one --input or --stormfront"));
            }
            let combined = combine_and_balance(&sets, seed)?;
            write_labeled_csv(&out, &combined)?;
            let rej = rejects_path(&out);
            write_labeled_rejects(&rej, &rejects)?;
            let per_class = combined.iter().filter(|e| e.label == 1).count();
            m.set("rows", combined.len());
            m.set("rows_per_class", per_class);
            m.output("data", &out)?;
            report_rejects(&mut m, rejects.len(), &rej)?;
            m.write(&manifest_path(&out))?;
        }
        Mode::Split => {
            let input = one_input(&a)?;
            let seed = ctx.seed(&mut m, s)?;
            let frac = ctx.resolve(&mut m, s, "test-fraction", a.test_fraction, 0.2)?;
            let stratified = !ctx.resolve(&mut m, s, "unstratified", a.unstratified.then_some(true), false)?;
            let prefix = match &a.out {
                Some(p) => p.clone(),
                None => dir.join(input.file_stem().unwrap_or_default()),
            };
            let with_suffix = |suffix: &str| {
                let mut s = prefix.as_os_str().to_os_string();
                s.push(suffix);
                PathBuf::from(s)
            };
            let loaded = read_labeled_csv(input, &mapping, Source::Twitter)?;
            let (train, test) = train_test_split(&loaded.records, frac, seed, stratified)?;
            let (train_path, test_path) = (with_suffix("-train.csv"), with_suffix("-test.csv"));
            write_labeled_csv(&train_path, &train)?;
            write_labeled_csv(&test_path, &test)?;
            let rej = with_suffix(".rejects.csv");
            write_labeled_rejects(&rej, &loaded.rejects)?;
            m.set("train_rows", train.len());
            m.set("test_rows", test.len());
            m.output("train", &train_path)?;
            m.output("test", &test_path)?;
            report_rejects(&mut m, loaded.rejects.len(), &rej)?;
            m.write(&with_suffix(".manifest"))?;
        }
    }
    Ok(())
}

pub fn kappa(ctx: &Ctx, a: KappaArgs) -> Result<()> {
    let s = SECTION_KAPPA;
    let mut m = ctx.manifest(s)?;
    m.input("annotations", &a.annotations)?;
    let map = match a.label_map {
        LabelMapArg::Four => LabelMap::Four,
        LabelMapArg::Binary => LabelMap::Binary,
    };
    m.set("label-map", format!("{:?}", a.label_map).to_lowercase());
    let dir = ctx.out_dir(&mut m, s)?;
    let records = load_annotations_csv(&a.annotations)?;
    let pairs = pairwise_kappa(&records, map)?;
    let mut text = String::from("pair\tp_o\tp_e\tkappa\n");
    for (name, r) in ["1-2", "2-3", "1-3"].iter().zip(&pairs) {
        writeln!(text, "{name}\t{:.6}\t{:.6}\t{:.6}", r.observed, r.expected, r.kappa)?;
    }
    let mean = pairs.iter().map(|r| r.kappa).sum::<f64>() / 3.0;
    writeln!(text, "mean\t\t\t{mean:.6}")?;
    print!("{text}");
    let manifest = match &a.out {
        Some(out) => {
            fs::write(out, &text).map_err(|e| wsdetect::Error::Io {
                path: out.clone(),
                source: e,
            })?;
            m.output("table", out)?;
            manifest_path(out)
        }
        None => dir.join("kappa.manifest"),
    };
    m.set("mean_kappa", format!("{mean:?}"));
    m.write(&manifest)?;
    Ok(())
}
