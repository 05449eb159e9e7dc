use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn readrank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_readrank"))
        .args(args)
        .current_dir(dir)
        .env_remove("READRANK_CONFIG")
        .output()
        .expect("spawn readrank")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = readrank(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// A small synthetic corpus at `train.jsonl` and a second one at `test.jsonl`.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace { dir };
        for (name, seed) in [("train.jsonl", "1"), ("test.jsonl", "2")] {
            ok(ws.path(), &["synth", "--slugs", "12", "--dim", "5", "--seed", seed, "-o", name]);
        }
        ws
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.file(name)).unwrap()).unwrap()
    }
}

const FAST: &[&str] = &["--epochs", "5", "--hidden", "8"];

fn with_fast<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().chain(FAST).copied().collect()
}

#[test]
fn synth_train_rank_evaluate() {
    let ws = Workspace::new();
    let out = ok(ws.path(), &with_fast(&["train", "--corpus", "train.jsonl", "-o", "m.json", "--loss-log", "loss.json"]));
    let resolved: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(resolved["model"], "nprm");
    assert_eq!(ws.json("loss.json")["epoch_losses"].as_array().unwrap().len(), 5);

    let ranked = ok(ws.path(), &["rank", "--model", "m.json", "--corpus", "test.jsonl"]);
    let lines: Vec<Value> = String::from_utf8(ranked.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 12);
    for l in &lines {
        assert_eq!(l["order"].as_array().unwrap().len(), 3);
        assert_eq!(l["scores"].as_object().unwrap().len(), 3);
    }

    // Piping rankings into evaluate gives the same report as evaluating the model.
    ok(ws.path(), &["evaluate", "--model", "m.json", "--corpus", "test.jsonl", "-o", "direct.json"]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_readrank"))
        .args(["evaluate", "--rankings", "-", "--corpus", "test.jsonl", "-o", "piped.json"])
        .current_dir(ws.path())
        .env_remove("READRANK_CONFIG")
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&ranked.stdout).unwrap();
    assert!(child.wait().unwrap().success());
    assert_eq!(ws.json("direct.json"), ws.json("piped.json"));
    assert_eq!(ws.json("direct.json")["per_slug"].as_object().unwrap().len(), 12);
}

#[test]
fn rank_explicit_docs() {
    let ws = Workspace::new();
    ok(ws.path(), &with_fast(&["train", "--corpus", "train.jsonl", "-o", "m.json"]));
    let out = ok(ws.path(), &["rank", "--model", "m.json", "--corpus", "test.jsonl", "--docs", "s00-l2,s00-l0,s01-l1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut input: Vec<&str> = v["input"].as_array().unwrap().iter().map(|d| d.as_str().unwrap()).collect();
    input.sort_unstable();
    assert_eq!(input, ["s00-l0", "s00-l2", "s01-l1"]);
    let scores = v["scores"].as_object().unwrap();
    assert!(scores.values().all(|s| (0.0..2.0).contains(&s.as_f64().unwrap())));

    let one = readrank(ws.path(), &["rank", "--model", "m.json", "--corpus", "test.jsonl", "--docs", "s00-l2"]);
    assert_eq!(code(&one), 1);
}

#[test]
fn training_is_reproducible() {
    let ws = Workspace::new();
    for name in ["a.json", "b.json"] {
        ok(ws.path(), &with_fast(&["train", "--corpus", "train.jsonl", "--seed", "3", "-o", name]));
    }
    assert_eq!(fs::read(ws.file("a.json")).unwrap(), fs::read(ws.file("b.json")).unwrap());
    ok(ws.path(), &with_fast(&["train", "--corpus", "train.jsonl", "--seed", "4", "-o", "c.json"]));
    assert_ne!(fs::read(ws.file("a.json")).unwrap(), fs::read(ws.file("c.json")).unwrap());
}

#[test]
fn experiments_and_compare() {
    let ws = Workspace::new();
    ok(ws.path(), &with_fast(&["cv", "--corpus", "train.jsonl", "--k", "3", "-o", "nprm.json"]));
    ok(ws.path(), &with_fast(&["cv", "--corpus", "train.jsonl", "--k", "3", "--model", "ranksvm", "-o", "svm.json"]));
    let report = ws.json("nprm.json");
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    assert_eq!(report["pooled"]["per_slug"].as_object().unwrap().len(), 12);

    ok(ws.path(), &with_fast(&["cross", "--corpus", "train.jsonl", "--test-corpus", "test.jsonl", "-o", "cross.json"]));
    assert_eq!(ws.json("cross.json")["pooled"]["per_slug"].as_object().unwrap().len(), 12);

    let out = readrank(ws.path(), &["compare", "nprm.json", "svm.json", "--metric", "ndcg"]);
    match code(&out) {
        0 => {
            let v: Value = serde_json::from_slice(&out.stdout).unwrap();
            for key in ["metric", "W", "n", "p", "method"] {
                assert!(v.get(key).is_some(), "missing {key}");
            }
        }
        // Identical per-slug values leave the test undefined.
        c => assert_eq!(c, 2, "{}", String::from_utf8_lossy(&out.stderr)),
    }
    // A report compared with itself has only zero differences.
    assert_eq!(code(&readrank(ws.path(), &["compare", "nprm.json", "nprm.json"])), 2);
}

#[test]
fn config_file_from_environment() {
    let ws = Workspace::new();
    fs::write(
        ws.file("cfg.json"),
        r#"{"model": "ols", "train_corpus": "train.jsonl", "k": 4}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_readrank"))
        .args(["cv", "-o", "r.json"])
        .current_dir(ws.path())
        .env("READRANK_CONFIG", "cfg.json")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = ws.json("r.json");
    assert_eq!(report["config"]["model"], "ols");
    assert_eq!(report["folds"].as_array().unwrap().len(), 4);

    // Flags override config keys.
    ok(ws.path(), &["--config", "cfg.json", "cv", "--k", "2", "-o", "r2.json"]);
    assert_eq!(ws.json("r2.json")["folds"].as_array().unwrap().len(), 2);

    fs::write(ws.file("bad.json"), r#"{"modle": "ols"}"#).unwrap();
    assert_eq!(code(&readrank(ws.path(), &["--config", "bad.json", "cv", "--corpus", "train.jsonl"])), 1);
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    assert_eq!(code(&readrank(ws.path(), &["cv"])), 1);
    assert_eq!(code(&readrank(ws.path(), &["cv", "--corpus", "train.jsonl", "--bogus"])), 1);
    assert_eq!(code(&readrank(ws.path(), &["cross", "--corpus", "train.jsonl"])), 1);
    // An unreadable input is a runtime failure, not a usage error.
    assert_eq!(code(&readrank(ws.path(), &["cv", "--corpus", "missing.jsonl"])), 2);
    assert_eq!(code(&readrank(ws.path(), &["cv", "--corpus", "train.jsonl", "--k", "1"])), 1);
    assert_eq!(code(&readrank(ws.path(), &["train", "--corpus", "train.jsonl", "--combiner", "sum", "-o", "m.json"])), 1);
    assert_eq!(code(&readrank(ws.path(), &["--help"])), 0);

    let diverged = readrank(
        ws.path(),
        &["train", "--corpus", "train.jsonl", "--model", "mlp-regressor", "--lr", "1e200", "-o", "m.json"],
    );
    assert_eq!(code(&diverged), 2, "{}", String::from_utf8_lossy(&diverged.stderr));
}
