#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn kdaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs `command` (space separated words) on a config written into `dir`.
pub fn run_with(dir: &Path, command: &str, config: &Value, out: &str) -> Output {
    let name = format!("{}.json", command.replace(' ', "_"));
    let cfg = dir.join(&name);
    fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let mut args: Vec<String> = command.split(' ').map(String::from).collect();
    args.extend([
        "--config".into(),
        cfg.display().to_string(),
        "--out".into(),
        dir.join(out).display().to_string(),
    ]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    kdaug(&refs)
}

pub fn ok(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn gen_config(train: usize, test: usize) -> Value {
    json!({
        "task": {"num_classes": 2, "vocab_size": 120, "seq_len_range": [4, 8],
                 "class_token_bias": 3.0, "seed": 1},
        "embedding": {"dim": 6, "class_separation": 1.0, "noise": 1.0, "extra_tokens": 30,
                      "teacher_extra_noise": 2.0, "seed": 2},
        "train_size": train,
        "test_size": test
    })
}

pub fn teacher_config() -> Value {
    json!({
        "train": "data/train.tsv", "eval": "data/test.tsv",
        "embeddings": "data/teacher_embeddings.txt",
        "model": {"hidden_dim": 16, "num_classes": 2},
        "training": {"steps": 150, "lr": 0.003, "eval_every": 50}
    })
}

pub fn distill_config(steps: usize) -> Value {
    json!({
        "train": "data/train.tsv", "eval": "data/test.tsv", "embeddings": "data/embeddings.txt",
        "teacher": "teacher/checkpoint.json",
        "model": {"hidden_dim": 6, "num_classes": 2},
        "training": {"steps": steps, "lr": 0.01, "eval_every": steps}
    })
}

/// Synthetic data in `dir/data` and a teacher in `dir/teacher`.
pub fn workspace(dir: &Path) {
    ok(&run_with(
        dir,
        "gen-synthetic",
        &gen_config(600, 200),
        "data",
    ));
    ok(&run_with(
        dir,
        "train-teacher",
        &teacher_config(),
        "teacher",
    ));
}

/// Every file below `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// Manifest with the run-specific fields removed.
pub fn stable_manifest(bytes: &[u8]) -> Value {
    let mut v: Value = serde_json::from_slice(bytes).unwrap();
    let m = v.as_object_mut().unwrap();
    assert!(m.remove("timestamp").is_some());
    assert!(m.remove("wall_seconds").is_some());
    assert!(m.remove("out_dir").is_some());
    v
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}
