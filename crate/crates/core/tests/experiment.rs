mod common;

use common::*;
use crosslayer::models::ModelKind;
use crosslayer::train::{render_table, run_experiment, ExperimentConfig, MetricsReport, TrainConfig};

fn toy_config(model: ModelKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        model,
        train: TrainConfig {
            max_epochs: 6,
            patience: 2,
            ..toy_train_config()
        },
        ..ExperimentConfig::default()
    };
    cfg.node2vec.d_node = 8;
    cfg.node2vec.walks_per_node = 4;
    cfg.node2vec.walk_length = 10;
    cfg.node2vec.epochs = 1;
    cfg
}

fn toy_report(model: ModelKind, seeds: &[u64], workers: usize) -> MetricsReport {
    let mut cfg = toy_config(model);
    cfg.seeds = seeds.to_vec();
    // the auxiliary layer as target has no negatives, so only layer 1 runs
    cfg.targets = vec![1];
    run_experiment(&toy_graph(), "toy", &cfg, workers).unwrap()
}

#[test]
fn one_record_per_layer_and_seed() {
    let graph = toy_graph();
    let mut cfg = toy_config(ModelKind::TransGat);
    cfg.targets.clear();
    let report = run_experiment(&graph, "toy", &cfg, 2).unwrap();
    // layer 0 is the whole pool: a single-class target fails, and that
    // failure is isolated to its own runs
    assert_eq!(report.records.len() + report.failures.len(), 2 * 3);
    assert_eq!(report.records.len(), 3);
    assert!(!report.complete);
    assert!(report.failures.iter().all(|f| f.target_layer == 0));
    let seeds: Vec<u64> = report.records.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![42, 18, 45]);
}

#[test]
fn aggregates_are_means_of_records() {
    let report = toy_report(ModelKind::TransSle, &[42, 18, 45], 1);
    assert!(report.complete);
    let f1: Vec<f64> = report.records.iter().map(|r| r.macro_f1).collect();
    let mean = f1.iter().sum::<f64>() / 3.0;
    assert!((report.aggregates.macro_f1 - mean).abs() < 1e-12);
    report.check_aggregates().unwrap();

    let json = report.to_json().unwrap();
    assert_eq!(MetricsReport::from_json(&json).unwrap(), report);
    let tampered = json.replacen(
        &format!("\"macro_f1\": {}", report.aggregates.macro_f1),
        "\"macro_f1\": 0.123",
        1,
    );
    if tampered != json {
        assert!(MetricsReport::from_json(&tampered).is_err());
    }

    let csv = report.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + report.records.len());
    assert!(csv.starts_with("dataset,model,protocol,target_layer"));
}

#[test]
fn worker_count_does_not_change_results() {
    let a = toy_report(ModelKind::TransGat, &[42, 18], 1);
    let b = toy_report(ModelKind::TransGat, &[42, 18], 2);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn merge_combines_partials_and_refuses_conflicts() {
    let a = toy_report(ModelKind::TransSle, &[42], 1);
    let b = toy_report(ModelKind::TransSle, &[18], 1);
    let merged = MetricsReport::merge(&[a.clone(), b]).unwrap();
    assert_eq!(merged.records.len(), 2);
    merged.check_aggregates().unwrap();
    assert!(MetricsReport::merge(&[a.clone(), a.clone()]).is_err());

    let mut other = toy_config(ModelKind::TransSle);
    other.train.lr = 0.02;
    other.seeds = vec![45];
    other.targets = vec![1];
    let c = run_experiment(&toy_graph(), "toy", &other, 1).unwrap();
    assert_ne!(c.fingerprint, a.fingerprint);
    assert!(MetricsReport::merge(&[a, c]).is_err());
}

#[test]
fn fingerprint_ignores_seeds_and_targets() {
    let a = toy_config(ModelKind::TransSle);
    let mut b = a.clone();
    b.seeds = vec![7];
    b.targets = vec![1];
    assert_eq!(a.fingerprint(), b.fingerprint());
    b.node2vec.p = 2.0;
    assert_ne!(a.fingerprint(), b.fingerprint());
}

#[test]
fn table_has_both_metric_blocks() {
    let sle = toy_report(ModelKind::TransSle, &[42], 1);
    let gat = toy_report(ModelKind::TransGat, &[42], 1);
    let table = render_table(&[sle, gat]);
    assert!(table.contains("Macro-F1") && table.contains("ROC-AUC"));
    for row in ["trans_sle", "trans_gat", "common_neighbors"] {
        assert_eq!(table.matches(row).count(), 2, "{table}");
    }
}
