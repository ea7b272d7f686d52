// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdls::report::sha256_file;

const BIN: &str = env!("CARGO_BIN_EXE_sdls");

fn sdls(run: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--run")
        .arg(run)
        .output()
        .expect("binary runs")
}

fn ok(run: &Path, args: &[&str]) {
    let out = sdls(run, args);
    assert!(
        out.status.success(),
        "sdls {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.display().to_string()
}

struct Configs {
    corpus: String,
    train: String,
    forge: String,
    steer: String,
    eval: String,
    probe: String,
}

fn configs(dir: &Path) -> Configs {
    let greedy = r#"{"mode": {"kind": "greedy"}, "max_new_tokens": 16, "detail": "tokens"}"#;
    Configs {
        corpus: write_config(dir, "corpus.json", r#"{"n_pairs": 160, "n_eval": 8}"#),
        train: write_config(dir, "train.json", r#"{"model": {"d_model": 8}, "train": {"epochs": 1, "batch_size": 16}}"#),
        forge: write_config(dir, "forge.json", r#"{"icv_k": [1, 2], "style_k": 2}"#),
        steer: write_config(dir, "steer.json", &format!(r#"{{"decode": {greedy}}}"#)),
        eval: write_config(dir, "eval.json", r#"{"resamples": 40}"#),
        probe: write_config(dir, "probe.json", &format!(r#"{{"probes": 4, "lambdas": [0, -0.1, -0.2], "decode": {greedy}}}"#)),
    }
}

fn full_pipeline(run: &Path, c: &Configs) {
    ok(run, &["gen-corpus", "--config", &c.corpus, "--seed", "3"]);
    ok(run, &["train", "--config", &c.train, "--seed", "3"]);
    ok(run, &["extract", "--seed", "3"]);
    ok(run, &["forge", "--config", &c.forge, "--seed", "3", "--kind", "sdiv,global-icv,controls"]);
    let sdiv = run.join("vectors/sdiv.json").display().to_string();
    let random = run.join("vectors/random_control.json").display().to_string();
    ok(
        run,
        &[
            "steer", "--config", &c.steer, "--seed", "3", "--vectors", &sdiv, &random, "--lambdas", "-0.1,-0.3", "--workers", "2",
        ],
    );
    ok(run, &["eval", "--config", &c.eval, "--seed", "3"]);
    ok(run, &["probe", "--config", &c.probe, "--seed", "3", "--dump-traces"]);
    ok(run, &["report", "--seed", "3"]);
}

fn hashes(run: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![run.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(run).unwrap().to_path_buf(), sha256_file(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn pipeline_is_reproducible_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let c = configs(dir.path());
    let run = dir.path().join("runs/smoke");
    full_pipeline(&run, &c);
    let first = hashes(&run);
    for f in [
        "corpus/pairs.jsonl",
        "corpus/eval.jsonl",
        "model.ckpt",
        "bundle.sdlsb",
        "vectors/sdiv.json",
        "sweep/sweep.csv",
        "eval/metrics.csv",
        "eval/operating_points.csv",
        "eval/summary.json",
        "probe/dose_response.csv",
        "probe/attention.csv",
        "manifest.json",
    ] {
        assert!(first.contains_key(Path::new(f)), "missing {f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("eval/summary.json")).unwrap()).unwrap();
    assert!(summary["verdict"].is_string(), "eval summary carries a verdict");
    assert_eq!(summary["provenance"]["seed"], 3);
    let header = fs::read_to_string(run.join("sweep/sweep.csv")).unwrap();
    assert!(header.starts_with("condition,vector,strategy,lambda,image_id,text\n"));

    full_pipeline(&run, &c);
    assert_eq!(hashes(&run), first, "rerun changed an output");
}

#[test]
fn single_class_sdiv_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = configs(dir.path());
    let run = dir.path().join("one_class");
    ok(&run, &["gen-corpus", "--config", &c.corpus]);
    ok(&run, &["train", "--config", &c.train]);
    ok(&run, &["extract"]);
    let pairs = run.join("corpus/pairs.jsonl");
    let relabeled: String = fs::read_to_string(&pairs)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["semantic_class"] = "stability".into();
            format!("{v}\n")
        })
        .collect();
    fs::write(&pairs, relabeled).unwrap();
    let out = sdls(&run, &["forge", "--kind", "sdiv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient classes"));
}

#[test]
fn invalid_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("empty");
    let out = sdls(&run, &["extract"]);
    assert_eq!(out.status.code(), Some(2), "missing checkpoint");
    let bad = write_config(dir.path(), "bad.json", "{ not json");
    let out = sdls(&run, &["gen-corpus", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2), "malformed config");
    let neg = write_config(dir.path(), "neg.json", r#"{"history_fraction": 1.5}"#);
    let out = sdls(&run, &["gen-corpus", "--config", &neg]);
    assert_eq!(out.status.code(), Some(2), "out-of-range config");
}
