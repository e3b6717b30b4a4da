use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn planoforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planoforge"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = planoforge(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus_cfg = d.join("corpus.json");
    std::fs::write(&corpus_cfg, json!({ "store_count": 2, "planograms_per_store": 3 }).to_string()).unwrap();
    let train_cfg = d.join("train.json");
    let plan = json!({
        "model": { "widths": [3, 4, 5], "time_dim": 4 },
        "train": { "batch_size": 2, "timesteps": 10 }
    });
    std::fs::write(&train_cfg, plan.to_string()).unwrap();
    let (corpus, ck, q, samples) = (d.join("corpus"), d.join("m.plnf"), d.join("m8.plnf"), d.join("s.jsonl"));

    let v = ok_json(&["corpus-gen", "--config", path(&corpus_cfg), "--seed", "5", "--out", path(&corpus), "--json"]);
    assert_eq!(v["planograms"], 6);

    let v = ok_json(&["train", "--config", path(&train_cfg), "--corpus", path(&corpus), "--steps", "3", "--out", path(&ck), "--json"]);
    assert_eq!(v["steps"], 3);

    let args = ["sample", "--checkpoint", path(&ck), "--corpus", path(&corpus), "--count", "4", "--seed", "9", "--out", path(&samples), "--json"];
    let v = ok_json(&args);
    assert_eq!(v["count"], 4);
    let first = std::fs::read(&samples).unwrap();
    ok_json(&args);
    assert_eq!(std::fs::read(&samples).unwrap(), first, "sampling is deterministic in the seed");

    let v = ok_json(&["validate", "--corpus", path(&corpus), "--json"]);
    assert_eq!(v["overall"], 1.0);
    let v = ok_json(&["validate", "--corpus", path(&corpus), "--input", path(&samples), "--json"]);
    assert_eq!(v["planograms"], 4);

    let v = ok_json(&["report", "--corpus", path(&corpus), "--input", path(&samples), "--json"]);
    assert_eq!(v["sample_count"], 4);

    let v = ok_json(&["quantize", "--checkpoint", path(&ck), "--out", path(&q), "--json"]);
    assert!(v["int8_bytes"].as_u64().unwrap() < v["f32_bytes"].as_u64().unwrap() / 2);
    ok_json(&["sample", "--checkpoint", path(&q), "--corpus", path(&corpus), "--count", "2", "--json"]);
}

#[test]
fn edgesim_table_and_load() {
    let v = ok_json(&["edgesim", "--table2", "--rate", "5", "--duration-ms", "10000", "--seed", "1", "--json"]);
    let ms: Vec<f64> = v["table2"].as_array().unwrap().iter().map(|r| r["response_ms"].as_f64().unwrap()).collect();
    assert_eq!(ms.len(), 5);
    assert_eq!(ms[0], 450.0);
    assert!(v["load"]["requests"].as_u64().unwrap() > 0);

    let text = planoforge(&["edgesim", "--table2"]);
    assert!(String::from_utf8(text.stdout).unwrap().contains("10000"));
}

#[test]
fn errors_exit_nonzero_with_a_json_line() {
    let out = planoforge(&["corpus-gen"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("--out"));

    let out = planoforge(&["edgesim"]);
    assert_eq!(out.status.code(), Some(1));
}
