#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ugvq::synthetic::{ratings_to_csv, synthetic_ratings, CorpusSpec, RatingSpec, SyntheticCorpus};

pub fn ugvq(args: &[&str]) -> Output {
    ugvq_env(args, &[])
}

pub fn ugvq_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ugvq"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("UGVQ_CACHE_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Writes the corpus under `dir` and returns the manifest path.
pub fn corpus(dir: &Path, spec: CorpusSpec) -> PathBuf {
    SyntheticCorpus::generate(spec).write(dir).expect("corpus written")
}

pub fn ratings_csv(dir: &Path, spec: &RatingSpec) -> PathBuf {
    let path = dir.join("ratings.csv");
    fs::write(&path, ratings_to_csv(&synthetic_ratings(spec))).unwrap();
    path
}

/// Laptop-sized model; `extra` is appended verbatim.
pub fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "seed = 0\n{extra}\n\
         [fusion]\nmodel_dim = 16\nscma_heads = 4\nscma_ffn_dim = 32\nfused_dim = 32\nregressor_hidden = 64\n\
         [train]\nlr = 1e-3\nepochs = 3\nbatch_size = 8\n"
    );
    fs::write(&path, text).unwrap();
    path
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

pub fn events(log: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}
