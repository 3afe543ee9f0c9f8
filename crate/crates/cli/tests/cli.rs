use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crosslayer"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).env("RUST_LOG", "warn").output().expect("spawn");
    out
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two groups of 12; layer 1 holds both cliques, layer 2 only the first,
/// layer 3 a ring.
fn toy_dataset(dir: &Path) -> PathBuf {
    let mut lines = String::new();
    let clique = |lo: usize, hi: usize, layer: usize, lines: &mut String| {
        for u in lo..hi {
            for v in u + 1..hi {
                lines.push_str(&format!("{layer} {u} {v} 1\n"));
            }
        }
    };
    clique(0, 12, 1, &mut lines);
    clique(12, 24, 1, &mut lines);
    clique(0, 12, 2, &mut lines);
    for u in 0..24 {
        lines.push_str(&format!("3 {u} {} 1\n", (u + 1) % 24));
    }
    let path = dir.join("toy_multiplex.edges");
    fs::write(&path, lines).unwrap();
    path
}

fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("fast.json");
    fs::write(
        &path,
        r#"{
  "experiment": {
    "seeds": [42, 18],
    "targets": [1],
    "node2vec": {"d_node": 8, "walk_length": 10, "walks_per_node": 2, "epochs": 1},
    "train": {"lr": 0.01, "batch_size": 32, "max_epochs": 4, "patience": 2}
  }
}"#,
    )
    .unwrap();
    path
}

fn aarhus() -> Option<PathBuf> {
    let dir = std::env::var_os("MPX_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    let p = dir.join("CS-Aarhus_multiplex.edges");
    if p.exists() {
        Some(p)
    } else {
        eprintln!("CS-Aarhus not found in {}; skipping", dir.display());
        None
    }
}

fn pipeline(out: &Path, data: &Path, cfg: &Path, extra: &[&str]) {
    let base = ["--out", s(out), "--config", s(cfg)];
    let with = |stage: &[&str]| -> Vec<String> {
        base.iter()
            .chain(stage)
            .chain(extra)
            .map(|x| x.to_string())
            .collect()
    };
    for stage in [
        vec!["prepare", "--dataset", s(data)],
        vec!["embed"],
        vec!["train"],
        vec!["evaluate"],
        vec!["report"],
    ] {
        let args = with(&stage);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&refs);
    }
}

#[test]
fn prepare_reports_aarhus_summary() {
    let Some(data) = aarhus() else { return };
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&["--out", s(tmp.path()), "prepare", "--dataset", s(&data)]);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["nodes"], 61);
    assert_eq!(v["layers"], 5);
    assert_eq!(v["edges"], 620);
    assert_eq!(v["dataset"], "CS-Aarhus");
    let splits = fs::read_dir(tmp.path().join("prepare/splits/transductive_stratified")).unwrap().count();
    assert_eq!(splits, 15);
}

#[test]
fn prepare_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let data = toy_dataset(tmp.path());
    let out = tmp.path().join("run");
    let read_all = |out: &Path| {
        let mut files = vec![out.join("manifest.json"), out.join("prepare/graph.mxgr"), out.join("prepare/pool.csv")];
        let splits = out.join("prepare/splits/transductive_stratified");
        let mut listed: Vec<PathBuf> = fs::read_dir(&splits).unwrap().map(|e| e.unwrap().path()).collect();
        listed.sort();
        files.extend(listed);
        files.iter().map(|f| fs::read(f).unwrap()).collect::<Vec<_>>()
    };
    ok(&["--out", s(&out), "prepare", "--dataset", s(&data)]);
    let first = read_all(&out);
    ok(&["--out", s(&out), "prepare", "--dataset", s(&data)]);
    assert_eq!(first, read_all(&out));
}

#[test]
fn missing_dataset_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["--out", s(tmp.path()), "prepare", "--dataset", "/nonexistent/x.edges"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/x.edges"), "{err}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = toy_dataset(tmp.path());
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    // Trans-GAT option on Trans-SLE
    let out = run(&["--out", s(tmp.path()), "prepare", "--dataset", s(&data), "--no-self-loops"]);
    assert_eq!(out.status.code(), Some(1));
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": {"lr": 1}}"#).unwrap();
    let out = run(&["--out", s(tmp.path()), "--config", s(&bad), "prepare", "--dataset", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
    // stages out of order
    let empty = tmp.path().join("empty");
    let out = run(&["--out", s(&empty), "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prepare"));
}

#[test]
fn single_class_targets_are_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let data = toy_dataset(tmp.path());
    let stdout = ok(&["--out", s(tmp.path()), "--seed", "42", "prepare", "--dataset", s(&data)]);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let skipped = v["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0]["target_layer"], 0);
}

#[test]
fn full_pipeline_writes_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let data = toy_dataset(tmp.path());
    let cfg = fast_config(tmp.path());
    let out = tmp.path().join("run");
    pipeline(&out, &data, &cfg, &[]);
    for f in [
        "config.json",
        "manifest.json",
        "logs/train.log",
        "embed/transductive_stratified/t1_s42.mxem",
        "train/trans_sle/t1_s18.mxck",
        "train/trans_sle/t1_s18.epochs.csv",
        "evaluate/trans_sle/t1_s42.json",
        "report/trans_sle.json",
        "report/trans_sle.csv",
        "report/table.txt",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report/trans_sle.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 2);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for stage in ["prepare", "embed", "train/trans_sle", "evaluate/trans_sle", "report/trans_sle"] {
        assert!(manifest["stages"][stage]["files"].as_object().is_some_and(|f| !f.is_empty()), "{stage}");
    }
    let log = fs::read_to_string(out.join("logs/train.log")).unwrap();
    assert!(log.lines().all(|l| l.starts_with("20")), "{log}");

    // a second model into the same run directory shares the table
    ok(&["--out", s(&out), "train", "--model", "trans_gat"]);
    ok(&["--out", s(&out), "evaluate"]);
    let table = ok(&["--out", s(&out), "report"]);
    assert!(table.contains("Macro-F1") && table.contains("ROC-AUC"), "{table}");
    for row in ["common_neighbors", "trans_sle", "trans_gat"] {
        assert_eq!(table.matches(row).count(), 2, "{table}");
    }
}

#[test]
fn fixed_seed_gives_identical_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let data = toy_dataset(tmp.path());
    let cfg = fast_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    pipeline(&a, &data, &cfg, &["--seed", "42", "--workers", "1"]);
    pipeline(&b, &data, &cfg, &["--seed", "42", "--workers", "2"]);
    for f in [
        "train/trans_sle/t1_s42.mxck",
        "embed/transductive_stratified/t1_s42.mxem",
        "evaluate/trans_sle/t1_s42.json",
        "manifest.json",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn reports_merge_across_run_directories_and_refuse_conflicts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = toy_dataset(tmp.path());
    let cfg = fast_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    pipeline(&a, &data, &cfg, &["--seed", "42"]);
    pipeline(&b, &data, &cfg, &["--seed", "18"]);
    ok(&["--out", s(&a), "report", "--from", s(&b)]);
    let merged: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report/trans_sle.json")).unwrap()).unwrap();
    assert_eq!(merged["records"].as_array().unwrap().len(), 2);

    let c = tmp.path().join("c");
    pipeline(&c, &data, &cfg, &["--seed", "45", "--lr", "0.05"]);
    let out = run(&["--out", s(&a), "--seed", "42", "report", "--from", s(&c)]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
