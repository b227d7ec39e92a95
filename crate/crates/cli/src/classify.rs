use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, ValueEnum};
use wsdetect::baseline::{lr_train, LrConfig};
use wsdetect::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Classifier};
use wsdetect::corpus::preprocess;
use wsdetect::datasets::{load_labeled_csv, split_indices, write_labeled_csv, LabelMapping, LabeledExample, Source};
use wsdetect::embeddings::{average_embedding, load_embeddings};
use wsdetect::eval::{evaluate as score, render_report, ReportFormat};
use wsdetect::nn::{train as train_bilstm, AdamConfig, BiLstmModel, TrainConfig};

use crate::manifest::Manifest;
use crate::{exit, manifest_path, output_path, Ctx, PreprocessArgs, ReportFormatArg};

const SECTION_TRAIN: &str = "train";
const SECTION_EVALUATE: &str = "evaluate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Bidirectional LSTM over the embedding sequence.
    Bilstm,
    /// Logistic regression over the averaged embedding.
    Lr,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labeled `text,label` CSV.
    #[arg(long)]
    dataset: PathBuf,
    /// Word embeddings in text format.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "bilstm")]
    model: ModelKind,
    /// Passes over the training split [default: 10 for bilstm, 500 for lr].
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size, bilstm only [default: 256].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Step size [default: 0.001 (Adam) for bilstm, 0.5 for lr].
    #[arg(long)]
    lr: Option<f64>,
    /// L2 penalty, lr only [default: 0.0001].
    #[arg(long)]
    l2: Option<f64>,
    /// Held-out fraction [default: 0.2].
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Split without preserving class proportions.
    #[arg(long)]
    unstratified: bool,
    /// LSTM units per direction [default: 64].
    #[arg(long)]
    hidden_size: Option<usize>,
    /// Width of the first dense layer [default: 16].
    #[arg(long)]
    dense1_size: Option<usize>,
    /// Tokens kept per post [default: 64].
    #[arg(long)]
    max_sequence_length: Option<usize>,
    /// Keep the embedding table fixed during training.
    #[arg(long)]
    freeze_embeddings: bool,
    #[command(flatten)]
    preprocess: PreprocessArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled `text,label` CSV.
    #[arg(long)]
    dataset: PathBuf,
    /// Embeddings the checkpoint must match.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Report file [default: <out-dir>/<dataset stem>-report.csv].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: ReportFormatArg,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn load_dataset(path: &Path) -> Result<Vec<LabeledExample>> {
    let data = load_labeled_csv(path, &LabelMapping::default(), Source::Twitter)?;
    if data.is_empty() {
        return Err(exit(2, format!("{}: dataset has no rows", path.display())));
    }
    Ok(data)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| wsdetect::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn format_of(f: ReportFormatArg) -> ReportFormat {
    match f {
        ReportFormatArg::Csv => ReportFormat::Csv,
        ReportFormatArg::Markdown => ReportFormat::Markdown,
    }
}

fn warn_undefined(report: &wsdetect::eval::EvalReport) {
    if !report.undefined.is_empty() {
        eprintln!(
            "warning: undefined metrics reported as 0: {}",
            report.undefined.join(", ")
        );
    }
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let s = SECTION_TRAIN;
    let mut m = ctx.manifest(s)?;
    m.input("dataset", &a.dataset)?;
    m.input("embeddings", &a.embeddings)?;
    m.set("model", format!("{:?}", a.model).to_lowercase());
    let seed = ctx.seed(&mut m, s)?;
    let (threads, _) = ctx.threads(&mut m, s)?;
    let pre = ctx.preprocess(&mut m, &a.preprocess)?;
    let test_fraction = ctx.resolve(&mut m, s, "test-fraction", a.test_fraction, 0.2)?;
    let stratified = !ctx.resolve(&mut m, s, "unstratified", a.unstratified.then_some(true), false)?;
    let dir = ctx.out_dir(&mut m, s)?;

    let data = load_dataset(&a.dataset)?;
    let emb = load_embeddings(&a.embeddings)?;
    let tokens: Vec<_> = data.iter().map(|e| preprocess(&e.text, &pre)).collect();
    let labels: Vec<u8> = data.iter().map(|e| e.label).collect();
    let dataset_id = format!("{}-test", stem(&a.dataset));

    let (ckpt, train_idx, test_idx, report, losses) = match a.model {
        ModelKind::Bilstm => {
            let d = TrainConfig::default();
            let cfg = TrainConfig {
                epochs: ctx.resolve(&mut m, s, "epochs", a.epochs, d.epochs)?,
                batch_size: ctx.resolve(&mut m, s, "batch-size", a.batch_size, d.batch_size)?,
                adam: AdamConfig {
                    lr: ctx.resolve(&mut m, s, "lr", a.lr, d.adam.lr)?,
                    ..d.adam
                },
                test_fraction,
                stratified,
                seed,
                hidden_size: ctx.resolve(&mut m, s, "hidden-size", a.hidden_size, d.hidden_size)?,
                dense1_size: ctx.resolve(&mut m, s, "dense1-size", a.dense1_size, d.dense1_size)?,
                max_sequence_length: ctx.resolve(
                    &mut m,
                    s,
                    "max-sequence-length",
                    a.max_sequence_length,
                    d.max_sequence_length,
                )?,
                trainable_embedding: !ctx.resolve(
                    &mut m,
                    s,
                    "freeze-embeddings",
                    a.freeze_embeddings.then_some(true),
                    false,
                )?,
                threads,
                dataset_id: dataset_id.clone(),
            };
            let model = BiLstmModel::new(&emb, &cfg.model_config(), seed)?;
            let pairs: Vec<_> = tokens.into_iter().zip(labels).collect();
            let out = train_bilstm(model, &pairs, &cfg)?;
            let ckpt = Checkpoint {
                classifier: Classifier::BiLstm(out.model),
                preprocess: pre,
            };
            (ckpt, out.train_indices, out.test_indices, out.report, out.loss_history)
        }
        ModelKind::Lr => {
            let d = LrConfig::default();
            let cfg = LrConfig {
                l2: ctx.resolve(&mut m, s, "l2", a.l2, d.l2)?,
                epochs: ctx.resolve(&mut m, s, "epochs", a.epochs, d.epochs)?,
                lr: ctx.resolve(&mut m, s, "lr", a.lr, d.lr)?,
                init_scale: d.init_scale,
                seed,
            };
            let (train_idx, test_idx) = split_indices(&labels, test_fraction, seed, stratified)?;
            if train_idx.is_empty() || test_idx.is_empty() {
                return Err(exit(1, "dataset too small for the requested test fraction"));
            }
            let features: Vec<(Vec<f64>, u8)> = train_idx
                .iter()
                .map(|&i| (average_embedding(&emb, &tokens[i]), labels[i]))
                .collect();
            let model = lr_train(&features, &cfg, &stem(&a.dataset))?;
            let ckpt = Checkpoint {
                classifier: Classifier::LogReg {
                    model,
                    embeddings: emb,
                },
                preprocess: pre,
            };
            let scores: Vec<f64> = test_idx.iter().map(|&i| ckpt.predict(&tokens[i])).collect();
            let test_labels: Vec<u8> = test_idx.iter().map(|&i| labels[i]).collect();
            let report = score("lr", &dataset_id, &scores, &test_labels)?;
            (ckpt, train_idx, test_idx, report, Vec::new())
        }
    };

    let base = stem(&a.dataset);
    let pick = |idx: &[usize]| -> Vec<LabeledExample> { idx.iter().map(|&i| data[i].clone()).collect() };
    let ckpt_path = dir.join("model.ckpt");
    let report_path = dir.join("report.csv");
    let train_path = dir.join(format!("{base}-train.csv"));
    let test_path = dir.join(format!("{base}-test.csv"));
    let loss_path = dir.join("loss_history.txt");
    save_checkpoint(&ckpt, &ckpt_path)?;
    let csv = render_report(std::slice::from_ref(&report), ReportFormat::Csv);
    write_text(&report_path, &csv)?;
    write_labeled_csv(&train_path, &pick(&train_idx))?;
    write_labeled_csv(&test_path, &pick(&test_idx))?;
    let loss_text: String = losses.iter().map(|l| format!("{l:?}\n")).collect();
    write_text(&loss_path, &loss_text)?;

    m.set("vocab_hash", ckpt.vocab_hash());
    m.set("train_rows", train_idx.len());
    m.set("test_rows", test_idx.len());
    for (name, p) in [
        ("checkpoint", &ckpt_path),
        ("report", &report_path),
        ("train", &train_path),
        ("test", &test_path),
        ("loss_history", &loss_path),
    ] {
        m.output(name, p)?;
    }
    m.write(&manifest_path(&ckpt_path))?;
    print!("{csv}");
    warn_undefined(&report);
    Ok(())
}

pub fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    let s = SECTION_EVALUATE;
    let mut m: Manifest = ctx.manifest(s)?;
    m.input("checkpoint", &a.checkpoint)?;
    m.input("dataset", &a.dataset)?;
    m.set("format", format!("{:?}", a.format).to_lowercase());
    let dir = ctx.out_dir(&mut m, s)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    if let Some(p) = &a.embeddings {
        m.input("embeddings", p)?;
        ckpt.check_embeddings(&load_embeddings(p)?)?;
    }
    let data = load_dataset(&a.dataset)?;
    let scores: Vec<f64> = data.iter().map(|e| ckpt.predict_text(&e.text)).collect();
    let labels: Vec<u8> = data.iter().map(|e| e.label).collect();
    let report = score(ckpt.kind(), &stem(&a.dataset), &scores, &labels)?;
    let text = render_report(std::slice::from_ref(&report), format_of(a.format));
    let ext = match a.format {
        ReportFormatArg::Csv => "csv",
        ReportFormatArg::Markdown => "md",
    };
    let out = output_path(
        a.out.as_deref(),
        &dir,
        &format!("{}-report.{ext}", stem(&a.dataset)),
    );
    write_text(&out, &text)?;
    m.set("vocab_hash", ckpt.vocab_hash());
    m.output("report", &out)?;
    m.write(&manifest_path(&out))?;
    print!("{text}");
    warn_undefined(&report);
    Ok(())
}
