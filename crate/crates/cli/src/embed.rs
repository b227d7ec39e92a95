use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use wsdetect::corpus::read_corpus;
use wsdetect::embeddings::{load_embeddings, most_similar, save_embeddings, train_cbow_with_history, CbowConfig, TrainMode};

use crate::{exit, manifest_path, output_path, Ctx, PreprocessArgs};

const SECTION_TRAIN: &str = "train-embeddings";
const SECTION_NEAREST: &str = "nearest";

#[derive(Args, Debug)]
pub struct TrainEmbeddingsArgs {
    /// Text corpus, one post per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output embedding file [default: <out-dir>/embeddings.txt].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Vector size [default: 300].
    #[arg(long)]
    dim: Option<usize>,
    /// Context words on each side [default: 5].
    #[arg(long)]
    window: Option<usize>,
    /// Negative samples per target [default: 5].
    #[arg(long)]
    negative: Option<usize>,
    /// Passes over the corpus [default: 5].
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate, decayed linearly [default: 0.025].
    #[arg(long)]
    lr: Option<f64>,
    /// Drop tokens seen fewer times [default: 5].
    #[arg(long)]
    min_count: Option<u64>,
    /// Downsampling threshold for frequent words, 0 to disable [default: 0.001].
    #[arg(long)]
    subsample: Option<f64>,
    #[command(flatten)]
    preprocess: PreprocessArgs,
}

#[derive(Args, Debug)]
pub struct NearestArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    word: String,
    /// Number of neighbours [default: 10].
    #[arg(short, long)]
    k: Option<usize>,
    /// Also write the neighbours to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn train_embeddings(ctx: &Ctx, a: TrainEmbeddingsArgs) -> Result<()> {
    let s = SECTION_TRAIN;
    let mut m = ctx.manifest(s)?;
    m.input("corpus", &a.corpus)?;
    let d = CbowConfig::default();
    let seed = ctx.seed(&mut m, s)?;
    let (threads, deterministic) = ctx.threads(&mut m, s)?;
    let cfg = CbowConfig {
        dim: ctx.resolve(&mut m, s, "dim", a.dim, d.dim)?,
        window: ctx.resolve(&mut m, s, "window", a.window, d.window)?,
        negative_samples: ctx.resolve(&mut m, s, "negative", a.negative, d.negative_samples)?,
        epochs: ctx.resolve(&mut m, s, "epochs", a.epochs, d.epochs)?,
        initial_lr: ctx.resolve(&mut m, s, "lr", a.lr, d.initial_lr)?,
        min_count: ctx.resolve(&mut m, s, "min-count", a.min_count, d.min_count)?,
        subsample_threshold: ctx.resolve(&mut m, s, "subsample", a.subsample, d.subsample_threshold)?,
        seed,
        mode: if deterministic {
            TrainMode::Deterministic
        } else {
            TrainMode::Parallel { threads }
        },
    };
    m.set("mode", if deterministic { "deterministic" } else { "parallel" });
    let pre = ctx.preprocess(&mut m, &a.preprocess)?;
    let dir = ctx.out_dir(&mut m, s)?;
    let out = output_path(a.out.as_deref(), &dir, "embeddings.txt");

    let corpus = read_corpus(&a.corpus, &pre)?;
    let run = train_cbow_with_history(corpus.iter(), &cfg)?;
    save_embeddings(&run.embeddings, &out)?;
    let losses: Vec<String> = run.epoch_losses.iter().map(|l| format!("{l:?}")).collect();
    m.set("epoch_losses", losses.join(","));
    m.set("vocab_size", run.embeddings.len());
    m.set("vocab_hash", run.embeddings.vocab().content_hash());
    m.output("embeddings", &out)?;
    m.write(&manifest_path(&out))?;
    eprintln!(
        "trained {} vectors of dimension {} -> {}",
        run.embeddings.len(),
        run.embeddings.dim(),
        out.display()
    );
    Ok(())
}

pub fn nearest(ctx: &Ctx, a: NearestArgs) -> Result<()> {
    let s = SECTION_NEAREST;
    let mut m = ctx.manifest(s)?;
    m.input("embeddings", &a.embeddings)?;
    m.set("word", &a.word);
    let k = ctx.resolve(&mut m, s, "k", a.k, 10)?;
    if k == 0 {
        return Err(exit(1, "-k must be >= 1"));
    }
    let dir = ctx.out_dir(&mut m, s)?;
    let emb = load_embeddings(&a.embeddings)?;
    let neighbours = most_similar(&emb, &a.word, k)?;
    let text: String = neighbours
        .iter()
        .map(|(w, sim)| format!("{w}\t{sim:.6}\n"))
        .collect();
    print!("{text}");
    let manifest = match &a.out {
        Some(out) => {
            fs::write(out, &text).map_err(|e| wsdetect::Error::Io {
                path: out.clone(),
                source: e,
            })?;
            m.output("neighbours", out)?;
            manifest_path(out)
        }
        None => dir.join("nearest.manifest"),
    };
    m.write(&manifest)?;
    Ok(())
}
