use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &[&str] = &[
    "--embedding_dim", "8", "--lstm_hidden", "8", "--ffnn_hidden", "16", "--ffnn_depth", "1",
    "--pointer_hidden", "8", "--phi_width", "4", "--max_span_width", "4",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanrefine"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, seed: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    let out = run(&["gen", "--output", p(&path), "--n_docs", "3", "--seed", seed]);
    assert!(out.status.success(), "{}", stderr(&out));
    path
}

fn train(corpus: &Path, checkpoint: &Path) -> Output {
    let mut args = vec!["train", "--train_data", p(corpus), "--checkpoint", p(checkpoint), "--epochs", "2"];
    args.extend_from_slice(SMALL);
    run(&args)
}

#[test]
fn train_predict_score_inspect() {
    let dir = TempDir::new().unwrap();
    let corpus = gen(&dir, "train.jsonl", "7");
    let ckpt = dir.path().join("model.ckpt");
    let out = train(&corpus, &ckpt);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<_> = stdout(&out).lines().filter(|l| l.starts_with("epoch ")).map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("loss") && lines[0].contains("dev_conll_f1"));
    assert!(ckpt.exists());

    let pred = dir.path().join("pred.jsonl");
    let mut args = vec!["predict", "--checkpoint", p(&ckpt), "--input", p(&corpus), "--output", p(&pred)];
    args.extend_from_slice(SMALL);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&pred).unwrap().lines().count(), 3);

    let out = run(&["score", "--gold", p(&corpus), "--pred", p(&pred)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("CoNLL avg F1"));

    let mut args = vec![
        "inspect", "--checkpoint", p(&ckpt), "--input", p(&corpus), "--doc_id", "synth-0000", "--top_k", "2",
    ];
    args.extend_from_slice(SMALL);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mentions = text.lines().filter(|l| l.starts_with("mention ")).count();
    let rows = text.lines().filter(|l| l.starts_with("  ")).count();
    assert!(mentions > 0);
    assert_eq!(rows, 2 * mentions);
}

#[test]
fn training_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let corpus = gen(&dir, "train.jsonl", "3");
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    let out_a = train(&corpus, &a);
    let out_b = train(&corpus, &b);
    assert!(out_a.status.success() && out_b.status.success());
    assert_eq!(stdout(&out_a), stdout(&out_b));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.jsonl", "11");
    let b = gen(&dir, "b.jsonl", "11");
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn scoring_gold_against_itself_is_perfect() {
    let dir = TempDir::new().unwrap();
    let corpus = gen(&dir, "gold.jsonl", "5");
    let out = run(&["score", "--gold", p(&corpus), "--pred", p(&corpus)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("CoNLL avg F1 1.0000"), "{text}");
    assert_eq!(text.matches("F1 1.0000").count(), 4);
}

#[test]
fn mismatched_documents_are_a_data_error() {
    let dir = TempDir::new().unwrap();
    let gold = gen(&dir, "gold.jsonl", "5");
    let pred = dir.path().join("pred.jsonl");
    fs::write(&pred, "{\"doc_id\": \"elsewhere\", \"clusters\": []}\n").unwrap();
    let out = run(&["score", "--gold", p(&gold), "--pred", p(&pred)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("elsewhere"));
}

#[test]
fn missing_required_path_names_the_key() {
    let out = run(&["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("train_data"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_rejected() {
    let out = run(&["gen", "--outptu", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("outptu"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out_path = dir.path().join("c.jsonl");
    fs::write(&cfg, format!("# synthetic corpus\noutput = {}\nn_docs = 4\n", out_path.display())).unwrap();
    let out = run(&["gen", "--config", p(&cfg), "--n_docs", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&out_path).unwrap().lines().count(), 2);
}

#[test]
fn empty_input_gives_empty_predictions() {
    let dir = TempDir::new().unwrap();
    let corpus = gen(&dir, "train.jsonl", "1");
    let ckpt = dir.path().join("model.ckpt");
    assert!(train(&corpus, &ckpt).status.success());
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let pred = dir.path().join("pred.jsonl");
    let mut args = vec!["predict", "--checkpoint", p(&ckpt), "--input", p(&empty), "--output", p(&pred)];
    args.extend_from_slice(SMALL);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&pred).unwrap(), "");
}

#[test]
fn checkpoint_for_another_shape_is_rejected() {
    let dir = TempDir::new().unwrap();
    let corpus = gen(&dir, "train.jsonl", "2");
    let ckpt = dir.path().join("model.ckpt");
    assert!(train(&corpus, &ckpt).status.success());
    let pred = dir.path().join("pred.jsonl");
    let out = run(&["predict", "--checkpoint", p(&ckpt), "--input", p(&corpus), "--output", p(&pred)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does not match"), "{}", stderr(&out));
}

#[test]
fn corrupt_checkpoint_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let corpus = gen(&dir, "train.jsonl", "2");
    let ckpt = dir.path().join("model.ckpt");
    fs::write(&ckpt, b"XXXX garbage").unwrap();
    let pred = dir.path().join("pred.jsonl");
    let out = run(&["predict", "--checkpoint", p(&ckpt), "--input", p(&corpus), "--output", p(&pred)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("magic"), "{}", stderr(&out));
}
