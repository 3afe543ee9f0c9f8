//! Leakage-guarded access to the layers used for feature construction.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{layer_seed, EmbeddingTable, Embedder, LayerEmbedding};
use crate::error::{Error, Result};
use crate::graph::{LayerGraph, MultiplexGraph, NodePair, SplitBundle};

/// The layers a model may build features from. For the target layer this
/// holds either its training positives or nothing at all; any pair of the
/// target layer outside the training split is counted as a leak when seen.
#[derive(Debug)]
pub struct FeatureView {
    layers: Vec<Option<LayerGraph>>,
    target: usize,
    forbidden: HashSet<NodePair>,
    leaked: AtomicUsize,
}

impl FeatureView {
    /// Every layer in full except the target, which keeps only the training
    /// positives of `bundle`.
    pub fn training_edges_only(graph: &MultiplexGraph, bundle: &SplitBundle) -> Result<Self> {
        let target = bundle.target_layer;
        graph.check_layer(target)?;
        let train = LayerGraph::from_pairs(graph.node_count(), bundle.training_positive_pairs())?;
        let forbidden: HashSet<NodePair> = graph
            .layer(target)
            .edges()
            .iter()
            .filter(|e| !train.contains(**e))
            .copied()
            .collect();
        let mut layers: Vec<Option<LayerGraph>> = graph.layers().iter().cloned().map(Some).collect();
        layers[target] = Some(train);
        let view = FeatureView {
            layers,
            target,
            forbidden,
            leaked: AtomicUsize::new(0),
        };
        view.audit(target, view.layers[target].as_ref().unwrap().edges().iter().copied());
        Ok(view)
    }

    /// Every layer except the target, which cannot be read at all.
    pub fn without_target(graph: &MultiplexGraph, target: usize) -> Result<Self> {
        graph.check_layer(target)?;
        let mut layers: Vec<Option<LayerGraph>> = graph.layers().iter().cloned().map(Some).collect();
        layers[target] = None;
        Ok(FeatureView {
            layers,
            target,
            forbidden: graph.layer(target).edges().iter().copied().collect(),
            leaked: AtomicUsize::new(0),
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn node_count(&self) -> usize {
        self.layers.iter().flatten().next().map_or(0, |l| l.node_count())
    }

    pub fn is_readable(&self, m: usize) -> bool {
        self.layers.get(m).is_some_and(|l| l.is_some())
    }

    /// A blocked layer counts as a leak and returns an error.
    pub fn layer(&self, m: usize) -> Result<&LayerGraph> {
        match self.layers.get(m) {
            Some(Some(l)) => Ok(l),
            Some(None) => {
                self.leaked.fetch_add(1, Ordering::Relaxed);
                Err(Error::Leakage(format!("layer {m} is the target layer and cannot feed features")))
            }
            None => Err(Error::InvalidArgument(format!("layer {m} out of range"))),
        }
    }

    /// Counts pairs of layer `m` that belong to the target's held-back edges.
    pub fn audit(&self, m: usize, pairs: impl IntoIterator<Item = NodePair>) {
        if m != self.target {
            return;
        }
        let hits = pairs.into_iter().filter(|p| self.forbidden.contains(p)).count();
        self.leaked.fetch_add(hits, Ordering::Relaxed);
    }

    pub fn leaked_reads(&self) -> usize {
        self.leaked.load(Ordering::Relaxed)
    }
}

/// Embeds every readable layer of `view`. Non-target layers may be taken
/// from `full_layers` (embeddings of the unmasked layers under the same
/// seed), which makes them identical to a fresh computation.
pub fn embed_view(
    view: &FeatureView,
    embedder: &dyn Embedder,
    d_node: usize,
    seed: u64,
    full_layers: Option<&[LayerEmbedding]>,
) -> Result<(EmbeddingTable, Vec<Vec<f64>>)> {
    let mut rows = Vec::with_capacity(view.layer_count());
    let mut losses = Vec::with_capacity(view.layer_count());
    for m in 0..view.layer_count() {
        let emb = match full_layers {
            Some(cached) if m != view.target() => cached[m].clone(),
            _ => {
                let layer = view.layer(m)?;
                view.audit(m, layer.edges().iter().copied());
                embedder.embed_layer(layer, layer_seed(seed, m))?
            }
        };
        rows.push(emb.rows);
        losses.push(emb.epoch_losses);
    }
    Ok((EmbeddingTable::new(view.node_count(), d_node, rows)?, losses))
}

/// Embeddings of every layer in full, for reuse across target layers.
pub fn embed_full_layers(graph: &MultiplexGraph, embedder: &dyn Embedder, seed: u64) -> Result<Vec<LayerEmbedding>> {
    graph
        .layers()
        .iter()
        .enumerate()
        .map(|(m, layer)| embedder.embed_layer(layer, layer_seed(seed, m)))
        .collect()
}
