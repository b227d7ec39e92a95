//! `wsdetect`: train embeddings and classifiers, prepare datasets, and
//! evaluate, from the command line.

mod classify;
mod data;
mod embed;
mod manifest;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use wsdetect::corpus::PreprocessConfig;

use manifest::Manifest;
use settings::Settings;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "WSDETECT_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "wsdetect", version, about = "White supremacist hate speech detection toolkit")]
struct Cli {
    /// TOML file with default settings; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Force single-threaded numeric paths.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for outputs whose path is not given explicitly
    /// [default: $WSDETECT_OUT_DIR, else the current directory].
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train CBOW word embeddings on a corpus with one post per line.
    TrainEmbeddings(embed::TrainEmbeddingsArgs),
    /// Print the nearest neighbours of a word by cosine similarity.
    Nearest(embed::NearestArgs),
    /// Aggregate annotations, combine and balance datasets, or split one.
    PrepareData(data::PrepareDataArgs),
    /// Train a classifier and evaluate it on a held-out split.
    Train(classify::TrainArgs),
    /// Evaluate a checkpoint on a labeled dataset.
    Evaluate(classify::EvaluateArgs),
    /// Inter-annotator agreement of a three-annotator file.
    Kappa(data::KappaArgs),
}

/// Text cleaning switches; everything is cleaned by default.
#[derive(Args, Debug, Clone, Default)]
pub struct PreprocessArgs {
    /// Keep upper case.
    #[arg(long)]
    keep_case: bool,
    /// Keep URLs.
    #[arg(long)]
    keep_urls: bool,
    /// Keep @mentions.
    #[arg(long)]
    keep_mentions: bool,
    /// Keep the # of hashtags.
    #[arg(long)]
    keep_hashtag_symbol: bool,
    /// Keep punctuation.
    #[arg(long)]
    keep_punctuation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormatArg {
    Csv,
    Markdown,
}

/// An error with a specific exit status.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn exit(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit {
        code,
        message: message.into(),
    }
    .into()
}

/// Global options plus the config file, shared by every command.
pub struct Ctx {
    settings: Settings,
    seed: Option<u64>,
    deterministic: bool,
    threads: Option<usize>,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    pub fn manifest(&self, command: &str) -> Result<Manifest> {
        let mut m = Manifest::new(command);
        if let Some(p) = self.settings.path() {
            m.input("config", p)?;
        }
        Ok(m)
    }

    pub fn resolve<T: settings::Setting>(
        &self,
        m: &mut Manifest,
        section: &str,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T> {
        self.settings.resolve(m, section, key, flag, default)
    }

    pub fn resolve_opt<T: settings::Setting>(
        &self,
        m: &mut Manifest,
        section: &str,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>> {
        self.settings.resolve_opt(m, section, key, flag)
    }

    pub fn seed(&self, m: &mut Manifest, section: &str) -> Result<u64> {
        self.resolve(m, section, "seed", self.seed, 1)
    }

    /// `(threads, deterministic)`; deterministic runs use one thread.
    pub fn threads(&self, m: &mut Manifest, section: &str) -> Result<(usize, bool)> {
        let det = self.resolve(m, section, "deterministic", self.deterministic.then_some(true), false)?;
        let threads = self.resolve(m, section, "threads", self.threads, 1)?;
        if threads == 0 {
            return Err(exit(1, "--threads must be >= 1"));
        }
        let effective = if det { 1 } else { threads };
        m.set("effective_threads", effective);
        Ok((effective, det || effective == 1))
    }

    pub fn out_dir(&self, m: &mut Manifest, section: &str) -> Result<PathBuf> {
        let env = std::env::var(OUT_DIR_ENV).ok().filter(|s| !s.is_empty());
        let dir = self.resolve(
            m,
            section,
            "out-dir",
            self.out_dir.as_ref().map(|p| p.display().to_string()),
            env.unwrap_or_else(|| ".".into()),
        )?;
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir).map_err(|e| wsdetect::Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir)
    }

    pub fn preprocess(&self, m: &mut Manifest, args: &PreprocessArgs) -> Result<PreprocessConfig> {
        let d = PreprocessConfig::default();
        let s = "preprocess";
        let off = |b: bool| b.then_some(false);
        Ok(PreprocessConfig {
            lowercase: self.resolve(m, s, "lowercase", off(args.keep_case), d.lowercase)?,
            strip_urls: self.resolve(m, s, "strip-urls", off(args.keep_urls), d.strip_urls)?,
            strip_mentions: self.resolve(m, s, "strip-mentions", off(args.keep_mentions), d.strip_mentions)?,
            strip_hashtag_symbol: self.resolve(
                m,
                s,
                "strip-hashtag-symbol",
                off(args.keep_hashtag_symbol),
                d.strip_hashtag_symbol,
            )?,
            strip_punctuation: self.resolve(
                m,
                s,
                "strip-punctuation",
                off(args.keep_punctuation),
                d.strip_punctuation,
            )?,
            collapse_whitespace: d.collapse_whitespace,
        })
    }
}

/// `dir/name` unless `explicit` is given.
pub fn output_path(explicit: Option<&Path>, dir: &Path, name: &str) -> PathBuf {
    explicit.map_or_else(|| dir.join(name), Path::to_path_buf)
}

/// `<path>.manifest`
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(".manifest");
    PathBuf::from(s)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        return e.code;
    }
    match err.downcast_ref::<wsdetect::Error>() {
        Some(wsdetect::Error::Io { .. } | wsdetect::Error::Parse { .. }) => 2,
        Some(wsdetect::Error::OutOfVocabulary(_)) => 3,
        Some(wsdetect::Error::Incompatible(_)) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        settings: Settings::load(cli.config.as_deref())?,
        seed: cli.seed,
        deterministic: cli.deterministic,
        threads: cli.threads,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::TrainEmbeddings(a) => embed::train_embeddings(&ctx, a),
        Command::Nearest(a) => embed::nearest(&ctx, a),
        Command::PrepareData(a) => data::prepare_data(&ctx, a),
        Command::Train(a) => classify::train(&ctx, a),
        Command::Evaluate(a) => classify::evaluate(&ctx, a),
        Command::Kappa(a) => data::kappa(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
