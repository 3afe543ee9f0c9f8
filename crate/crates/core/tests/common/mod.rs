#![allow(dead_code)]

use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use crosslayer::embed::{EmbeddingTable, FeatureView};
use crosslayer::graph::{
    build_union_pool, label_for_target, parse_multiplex_edgelist, stratified_split, EdgeListFormat, MultiplexGraph,
    SplitBundle, SplitRatios,
};
use crosslayer::models::{ModelKind, ModelOptions, ModelSpec, TransGat, TransSle};
use crosslayer::train::TrainConfig;

pub const TOY_GROUP: usize = 12;
pub const TOY_D: usize = 4;

fn clique(nodes: std::ops::Range<usize>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in nodes.clone() {
        for v in u + 1..nodes.end {
            out.push((u, v));
        }
    }
    out
}

/// Two equal cliques A and B in the auxiliary layer 0; the target layer 1
/// is the clique on A. Common neighbours cannot tell A pairs from B pairs.
pub fn toy_graph() -> MultiplexGraph {
    let n = 2 * TOY_GROUP;
    let mut aux = clique(0..TOY_GROUP);
    aux.extend(clique(TOY_GROUP..n));
    MultiplexGraph::from_layer_pairs(n, vec![aux, clique(0..TOY_GROUP)]).unwrap()
}

pub fn toy_bundle(graph: &MultiplexGraph, seed: u64) -> SplitBundle {
    let pool = build_union_pool(graph);
    let ex = label_for_target(&pool, graph, 1).unwrap();
    stratified_split(&ex, SplitRatios::default(), seed).unwrap()
}

/// Layer-0 rows encode group membership; target-layer rows are zero.
pub fn toy_table() -> EmbeddingTable {
    let n = 2 * TOY_GROUP;
    let mut aux = vec![0.0f32; n * TOY_D];
    for node in 0..n {
        aux[node * TOY_D + usize::from(node >= TOY_GROUP)] = 1.0;
    }
    EmbeddingTable::new(n, TOY_D, vec![aux, vec![0.0; n * TOY_D]]).unwrap()
}

pub fn toy_train_config() -> TrainConfig {
    TrainConfig {
        lr: 1e-2,
        batch_size: 16,
        max_epochs: 50,
        patience: 49,
        ..TrainConfig::default()
    }
}

pub fn toy_sle(seed: u64) -> TransSle<f64> {
    let spec = ModelSpec::new(ModelKind::TransSle, 2, 2 * TOY_GROUP, TOY_D, 1, ModelOptions::default()).unwrap();
    TransSle::new(spec, Arc::new(toy_table()), seed).unwrap()
}

pub fn toy_gat(graph: &MultiplexGraph, seed: u64) -> TransGat<f64> {
    let spec = ModelSpec::new(ModelKind::TransGat, 2, 2 * TOY_GROUP, TOY_D, 1, ModelOptions::default()).unwrap();
    let view = FeatureView::without_target(graph, 1).unwrap();
    TransGat::new(spec, &view, seed, None).unwrap()
}

pub fn data_dir() -> PathBuf {
    std::env::var_os("MPX_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Loads `<data>/<file>` in layer-first format, or `None` when absent.
pub fn load_dataset(file: &str) -> Option<MultiplexGraph> {
    let path = data_dir().join(file);
    let f = std::fs::File::open(path).ok()?;
    Some(parse_multiplex_edgelist(BufReader::new(f), EdgeListFormat::LayerFirst).unwrap().graph)
}
