#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wsdetect::rng::SplitMix64;

/// Runs the binary in `dir` with a clean environment for output paths.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsdetect"))
        .args(args)
        .current_dir(dir)
        .env_remove("WSDETECT_OUT_DIR")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Fails with both streams when the command did not succeed.
pub fn ok(out: Output) -> Output {
    assert_eq!(code(&out), 0, "stdout:\n{}\nstderr:\n{}", stdout(&out), stderr(&out));
    out
}

/// `n` rows alternating label 1 and 0. Positives use only `pos*` words and
/// negatives only `neg*` words, 3 to 8 tokens each.
pub fn separable_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = SplitMix64::new(seed);
    let mut text = String::from("text,label\n");
    for i in 0..n {
        let label = 1 - i % 2;
        let prefix = if label == 1 { "pos" } else { "neg" };
        let len = 3 + rng.below(6);
        let words: Vec<String> = (0..len).map(|_| format!("{prefix}{}", rng.below(10))).collect();
        writeln!(text, "{},{label}", words.join(" ")).unwrap();
    }
    fs::write(path, text).unwrap();
}

/// The texts of a labeled CSV, one per line, for embedding training.
pub fn corpus_from_csv(csv: &Path, corpus: &Path) {
    let text = fs::read_to_string(csv).unwrap();
    let lines: String = text
        .lines()
        .skip(1)
        .map(|l| format!("{}\n", l.rsplit_once(',').unwrap().0))
        .collect();
    fs::write(corpus, lines).unwrap();
}

/// Two sentences differing only in their subject, repeated 200 times.
pub fn toy_corpus(path: &Path) {
    fs::write(path, "king rules the realm\nqueen rules the realm\n".repeat(200)).unwrap();
}

pub fn labeled_counts(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut counts = (0, 0);
    for line in text.lines().skip(1) {
        match line.rsplit_once(',').unwrap().1 {
            "0" => counts.0 += 1,
            "1" => counts.1 += 1,
            other => panic!("label {other}"),
        }
    }
    counts
}
