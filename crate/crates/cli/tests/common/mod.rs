#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Scale giving 9 train and 4 test windows per class.
pub const TINY_SCALE: &str = "0.00276";

pub fn itst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itst"))
        .args(args)
        .env("ITST_THREADS", "1")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        stderr(&o)
    );
    o
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `dir`, relative path to bytes.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

pub fn tiny_dataset(root: &Path, seed: u64) -> PathBuf {
    let dir = root.join(format!("data{seed}"));
    ok(itst(&[
        "gen-data",
        "--seed",
        &seed.to_string(),
        "--scale",
        TINY_SCALE,
        "--out",
        p(&dir),
    ]));
    dir
}

/// A fast model/training config for plumbing tests.
pub fn tiny_config(root: &Path, steps: usize) -> PathBuf {
    let path = root.join(format!("config{steps}.json"));
    let json = format!(
        r#"{{
  "model": {{ "d_model": 8, "heads": 2, "encoder_layers": 1, "decoder_layers": 1, "d_ffn": 16, "dropout": 0.1 }},
  "train": {{ "batch_size": 8, "max_steps": {steps}, "warmup_steps": 10, "eval_batch": 64 }}
}}"#
    );
    fs::write(&path, json).unwrap();
    path
}

/// Search space restricted to small models.
pub fn tiny_space(root: &Path) -> PathBuf {
    let path = root.join("space.json");
    let json = r#"{
  "d_model": [8, 16], "heads": [2, 4], "encoder_layers": [1], "decoder_layers": [1],
  "d_ffn": [16, 32], "dropout": [0.0, 0.3], "warmup_steps": [5.0, 50.0]
}"#;
    fs::write(&path, json).unwrap();
    path
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
