mod common;

use std::fs;
use std::path::Path;

use common::*;
use wsdetect::embeddings::load_embeddings;
use wsdetect::eval::parse_report_csv;

const TOY_FLAGS: [&str; 10] = [
    "--dim", "10", "--epochs", "10", "--lr", "0.01", "--min-count", "1", "--subsample", "0",
];

fn train_toy(dir: &Path, out: &str, seed: &str) {
    toy_corpus(&dir.join("toy.txt"));
    let mut args = vec!["train-embeddings", "--corpus", "toy.txt", "--out", out, "--seed", seed];
    args.extend(TOY_FLAGS);
    ok(run(dir, &args));
}

#[test]
fn train_embeddings_writes_loadable_file_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    train_toy(dir.path(), "toy.vec", "3");
    let emb = load_embeddings(&dir.path().join("toy.vec")).unwrap();
    assert_eq!(emb.len(), 5);
    assert_eq!(emb.dim(), 10);
    let manifest = fs::read_to_string(dir.path().join("toy.vec.manifest")).unwrap();
    for line in ["command=train-embeddings", "seed=3", "dim=10", "mode=deterministic"] {
        assert!(manifest.lines().any(|l| l == line), "{line} missing:\n{manifest}");
    }
    assert!(manifest.contains("output.embeddings.sha256="));
}

#[test]
fn missing_corpus_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train-embeddings", "--corpus", "nope.txt"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.txt"), "{}", stderr(&out));
}

#[test]
fn same_seed_gives_identical_embedding_files() {
    let dir = tempfile::tempdir().unwrap();
    train_toy(dir.path(), "a.vec", "7");
    train_toy(dir.path(), "b.vec", "7");
    let a = fs::read(dir.path().join("a.vec")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.vec")).unwrap());
    train_toy(dir.path(), "c.vec", "8");
    assert_ne!(a, fs::read(dir.path().join("c.vec")).unwrap());
}

fn hand_embeddings(dir: &Path) {
    fs::write(dir.join("hand.vec"), "3 2\na 1 0\nb 0.9 0.1\nc 0 1\n").unwrap();
}

#[test]
fn nearest_prints_top_neighbour() {
    let dir = tempfile::tempdir().unwrap();
    hand_embeddings(dir.path());
    let out = ok(run(dir.path(), &["nearest", "--embeddings", "hand.vec", "--word", "a", "-k", "1"]));
    // cos(a, b) = 0.9 / sqrt(0.82)
    assert_eq!(stdout(&out), "b\t0.993884\n");
    assert!(dir.path().join("nearest.manifest").exists());
}

#[test]
fn nearest_oov_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    hand_embeddings(dir.path());
    let out = run(dir.path(), &["nearest", "--embeddings", "hand.vec", "--word", "zebra"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn nearest_k_beyond_vocabulary_prints_all() {
    let dir = tempfile::tempdir().unwrap();
    hand_embeddings(dir.path());
    let out = ok(run(
        dir.path(),
        &["nearest", "--embeddings", "hand.vec", "--word", "c", "-k", "50", "--out", "n.tsv"],
    ));
    // cos(c, b) = 0.1 / sqrt(0.82), cos(c, a) = 0
    assert_eq!(stdout(&out), "b\t0.110432\na\t0.000000\n");
    assert_eq!(fs::read_to_string(dir.path().join("n.tsv")).unwrap(), stdout(&out));
}

fn labeled(path: &Path, pos: usize, neg: usize, tag: &str) {
    let mut text = String::from("text,label\n");
    for i in 0..pos {
        text.push_str(&format!("{tag} hate {i},1\n"));
    }
    for i in 0..neg {
        text.push_str(&format!("{tag} other {i},0\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn combine_balance_equalises_table_three_shaped_inputs() {
    let dir = tempfile::tempdir().unwrap();
    labeled(&dir.path().join("sf.csv"), 1196, 9748, "s");
    labeled(&dir.path().join("tw.csv"), 1100, 899, "t");
    ok(run(
        dir.path(),
        &["prepare-data", "--mode", "combine-balance", "--input", "sf.csv", "--input", "tw.csv"],
    ));
    assert_eq!(labeled_counts(&dir.path().join("combined-balanced.csv")), (2296, 2296));
    let manifest = fs::read_to_string(dir.path().join("combined-balanced.csv.manifest")).unwrap();
    assert!(manifest.contains("\nrows=4592\n"));
    assert!(manifest.contains("\nrejects=0\n"));
}

#[test]
fn aggregate_unanimous_fixture_has_no_rejects() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ann.csv"),
        "text,ann1,ann2,ann3\nx,neutral,neutral,neutral\ny,explicit_ws,explicit_ws,explicit_ws\n",
    )
    .unwrap();
    let out = ok(run(dir.path(), &["prepare-data", "--mode", "aggregate", "--input", "ann.csv"]));
    assert_eq!(fs::read_to_string(dir.path().join("aggregated.csv")).unwrap(), "text,label\nx,0\ny,1\n");
    assert_eq!(
        fs::read_to_string(dir.path().join("aggregated.rejects.csv")).unwrap(),
        "text,ann1,ann2,ann3,reason\n"
    );
    assert_eq!(stderr(&out), "");
}

#[test]
fn malformed_rows_are_listed_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ann.csv"),
        "text,ann1,ann2,ann3\nx,neutral,neutral,neutral\nbroken,neutral\nz,maybe,neutral,neutral\n",
    )
    .unwrap();
    ok(run(dir.path(), &["prepare-data", "--mode", "aggregate", "--input", "ann.csv"]));
    assert_eq!(
        fs::read_to_string(dir.path().join("aggregated.rejects.csv")).unwrap(),
        "text,ann1,ann2,ann3,reason\n\
         broken,neutral,,,\"line 3: expected 4 columns, found 2\"\n\
         z,maybe,neutral,neutral,\"line 4: unknown label \"\"maybe\"\"\"\n"
    );
}

#[test]
fn split_preserves_class_proportions() {
    let dir = tempfile::tempdir().unwrap();
    labeled(&dir.path().join("d.csv"), 30, 70, "d");
    ok(run(dir.path(), &["prepare-data", "--mode", "split", "--input", "d.csv", "--test-fraction", "0.2"]));
    assert_eq!(labeled_counts(&dir.path().join("d-test.csv")), (14, 6));
    assert_eq!(labeled_counts(&dir.path().join("d-train.csv")), (56, 24));
}

/// Separable data, embeddings trained on its own texts, and a small
/// BiLSTM configuration.
fn pipeline(dir: &Path) {
    separable_csv(&dir.join("sep.csv"), 200, 4);
    corpus_from_csv(&dir.join("sep.csv"), &dir.join("sep.txt"));
    ok(run(
        dir,
        &[
            "train-embeddings", "--corpus", "sep.txt", "--out", "sep.vec", "--dim", "8",
            "--min-count", "1", "--epochs", "3",
        ],
    ));
}

const SMALL_BILSTM: [&str; 10] = [
    "--epochs", "10", "--batch-size", "16", "--lr", "0.01", "--hidden-size", "8", "--dense1-size", "4",
];

fn train_bilstm(dir: &Path, out_dir: &str) -> String {
    let mut args = vec!["train", "--dataset", "sep.csv", "--embeddings", "sep.vec", "--out-dir", out_dir];
    args.extend(SMALL_BILSTM);
    ok(run(dir, &args));
    fs::read_to_string(dir.join(out_dir).join("report.csv")).unwrap()
}

#[test]
fn bilstm_pipeline_is_reproducible_and_evaluate_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let first = train_bilstm(d, "run1");
    let second = train_bilstm(d, "run2");
    assert_eq!(first, second);
    assert_eq!(
        fs::read(d.join("run1/model.ckpt")).unwrap(),
        fs::read(d.join("run2/model.ckpt")).unwrap()
    );
    let report = &parse_report_csv(&first).unwrap()[0];
    assert_eq!(report.model_id, "bilstm");
    assert_eq!(report.dataset_id, "sep-test");
    assert!(report.f1 >= 0.95, "{first}");
    assert_eq!(fs::read_to_string(d.join("run1/loss_history.txt")).unwrap().lines().count(), 10);

    let out = ok(run(
        d,
        &[
            "evaluate", "--checkpoint", "run1/model.ckpt", "--dataset", "run1/sep-test.csv",
            "--embeddings", "sep.vec", "--out", "eval.csv",
        ],
    ));
    assert_eq!(stdout(&out), first);
    assert_eq!(fs::read_to_string(d.join("eval.csv")).unwrap(), first);
    assert!(d.join("eval.csv.manifest").exists());
}

#[test]
fn logistic_regression_report_has_every_column() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let out = ok(run(d, &["train", "--model", "lr", "--dataset", "sep.csv", "--embeddings", "sep.vec"]));
    let text = fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(stdout(&out), text);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').count(), 9);
    assert!(lines[1].split(',').all(|f| !f.is_empty()));
    let report = &parse_report_csv(&text).unwrap()[0];
    assert_eq!(report.model_id, "lr");
    let manifest = fs::read_to_string(d.join("model.ckpt.manifest")).unwrap();
    assert!(manifest.contains("\nepochs=500\n") && manifest.contains("\nlr=0.5\n"));
}

#[test]
fn evaluate_rejects_embeddings_with_another_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    ok(run(d, &["train", "--model", "lr", "--dataset", "sep.csv", "--embeddings", "sep.vec"]));
    hand_embeddings(d);
    let out = run(
        d,
        &["evaluate", "--checkpoint", "model.ckpt", "--dataset", "sep.csv", "--embeddings", "hand.vec"],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("vocabulary hash"));
}

#[test]
fn empty_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    ok(run(d, &["train", "--model", "lr", "--dataset", "sep.csv", "--embeddings", "sep.vec"]));
    fs::write(d.join("empty.csv"), "text,label\n").unwrap();
    let out = run(d, &["evaluate", "--checkpoint", "model.ckpt", "--dataset", "empty.csv"]);
    assert_eq!(code(&out), 2);
    let out = run(d, &["train", "--dataset", "empty.csv", "--embeddings", "sep.vec"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn single_class_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    labeled(&d.join("one.csv"), 10, 0, "pos1");
    let out = run(d, &["train", "--dataset", "one.csv", "--embeddings", "sep.vec"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("both classes"));
}

fn kappa_fixture(dir: &Path) {
    // Annotator 3 repeats annotator 1 with implicit_ws for explicit_ws.
    fs::write(
        dir.join("k.csv"),
        "text,ann1,ann2,ann3\n\
         a,explicit_ws,explicit_ws,implicit_ws\n\
         b,neutral,neutral,neutral\n\
         c,explicit_ws,neutral,implicit_ws\n\
         d,neutral,neutral,neutral\n\
         e,explicit_ws,explicit_ws,implicit_ws\n\
         f,explicit_ws,neutral,implicit_ws\n",
    )
    .unwrap();
}

#[test]
fn kappa_unanimous_is_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("u.csv"),
        "text,ann1,ann2,ann3\na,neutral,neutral,neutral\nb,other_hate,other_hate,other_hate\n",
    )
    .unwrap();
    let out = ok(run(dir.path(), &["kappa", "--annotations", "u.csv"]));
    let text = stdout(&out);
    let kappas: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit('\t').next().unwrap()).collect();
    assert_eq!(kappas, ["1.000000"; 4]);
}

#[test]
fn kappa_matches_hand_computed_values() {
    let dir = tempfile::tempdir().unwrap();
    kappa_fixture(dir.path());
    // 1-2: p_o 4/6, p_e 4/9; 2-3: p_o 2/6, p_e 2/9; 1-3: p_o 2/6, p_e 1/9.
    let out = ok(run(dir.path(), &["kappa", "--annotations", "k.csv"]));
    assert_eq!(
        stdout(&out),
        "pair\tp_o\tp_e\tkappa\n\
         1-2\t0.666667\t0.444444\t0.400000\n\
         2-3\t0.333333\t0.222222\t0.142857\n\
         1-3\t0.333333\t0.111111\t0.250000\n\
         mean\t\t\t0.264286\n"
    );
    // Collapsed, annotator 3 equals annotator 1.
    let out = ok(run(dir.path(), &["kappa", "--annotations", "k.csv", "--label-map", "binary"]));
    assert_eq!(
        stdout(&out),
        "pair\tp_o\tp_e\tkappa\n\
         1-2\t0.666667\t0.444444\t0.400000\n\
         2-3\t0.666667\t0.444444\t0.400000\n\
         1-3\t1.000000\t0.555556\t1.000000\n\
         mean\t\t\t0.600000\n"
    );
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    hand_embeddings(d);
    fs::write(d.join("cfg.toml"), "k = 1\nout-dir = \"fromfile\"\n[nearest]\nk = 2\n").unwrap();
    let out = ok(run(d, &["--config", "cfg.toml", "nearest", "--embeddings", "hand.vec", "--word", "a"]));
    assert_eq!(stdout(&out).lines().count(), 2);
    let manifest = fs::read_to_string(d.join("fromfile/nearest.manifest")).unwrap();
    assert!(manifest.contains("\nk=2\n") && manifest.contains("input.config.sha256="));
    let out = ok(run(
        d,
        &["--config", "cfg.toml", "nearest", "--embeddings", "hand.vec", "--word", "a", "-k", "1"],
    ));
    assert_eq!(stdout(&out).lines().count(), 1);
}

#[test]
fn out_dir_defaults_to_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    hand_embeddings(d);
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_wsdetect"))
        .args(["nearest", "--embeddings", "hand.vec", "--word", "a"])
        .current_dir(d)
        .env("WSDETECT_OUT_DIR", "envdir")
        .output()
        .unwrap();
    ok(out);
    assert!(d.join("envdir/nearest.manifest").exists());
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    hand_embeddings(d);
    fs::write(d.join("bad.toml"), "k = 1\nk = = 2\n").unwrap();
    let out = run(d, &["--config", "bad.toml", "nearest", "--embeddings", "hand.vec", "--word", "a"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.toml:2:"), "{}", stderr(&out));
}
