mod common;

use common::*;
use crosslayer::graph::NodePair;
use crosslayer::train::{baseline_common_neighbors, evaluate, evaluate_scores, select_threshold, train_model};

#[test]
fn separable_toy_is_learned_by_both_models() {
    let graph = toy_graph();
    let bundle = toy_bundle(&graph, 42);
    let cfg = toy_train_config();

    let mut sle = toy_sle(42);
    let s = train_model(&mut sle, &bundle, &cfg, 42, None).unwrap();
    let mut gat = toy_gat(&graph, 42);
    let g = train_model(&mut gat, &bundle, &cfg, 42, None).unwrap();
    println!("sle best {} at {}, gat best {} at {}", s.best_val_macro_f1, s.best_epoch, g.best_val_macro_f1, g.best_epoch);
    assert_eq!(s.best_val_macro_f1, 1.0);
    assert_eq!(g.best_val_macro_f1, 1.0);

    let val: Vec<NodePair> = bundle.val().iter().map(|e| e.pair).collect();
    let val_labels: Vec<bool> = bundle.val().iter().map(|e| e.label).collect();
    let test: Vec<NodePair> = bundle.test().iter().map(|e| e.pair).collect();
    let (t, _) = select_threshold(&baseline_common_neighbors(&val, &graph, 1).unwrap(), &val_labels).unwrap();
    let base = evaluate_scores(baseline_common_neighbors(&test, &graph, 1).unwrap(), bundle.test(), t).unwrap();
    let sle_eval = evaluate(&sle, bundle.test(), s.threshold).unwrap();
    let gat_eval = evaluate(&gat, bundle.test(), g.threshold).unwrap();
    assert!(sle_eval.macro_f1 > base.macro_f1, "{} vs {}", sle_eval.macro_f1, base.macro_f1);
    assert!(gat_eval.macro_f1 > base.macro_f1, "{} vs {}", gat_eval.macro_f1, base.macro_f1);
}
