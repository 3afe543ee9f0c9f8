//! Per-layer Node2Vec embeddings and multi-view edge sequences.

mod feature;
mod skipgram;
mod table;
mod views;
mod walk;

pub use feature::*;
pub use skipgram::*;
pub use table::*;
pub use views::*;
pub use walk::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LayerGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Node2VecConfig {
    pub d_node: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    /// Initial skip-gram step size, decayed linearly to near zero.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Node2VecConfig {
    fn default() -> Self {
        Node2VecConfig {
            d_node: 64,
            p: 1.0,
            q: 1.0,
            walk_length: 40,
            walks_per_node: 10,
            window: 5,
            negatives_per_positive: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 42,
        }
    }
}

impl Node2VecConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("node2vec: {m}")));
        if self.d_node < 2 {
            return bad("d_node must be at least 2");
        }
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return bad("p and q must be positive");
        }
        if self.walk_length < 2 {
            return bad("walk_length must be at least 2");
        }
        if self.window == 0 || self.epochs == 0 || self.walks_per_node == 0 {
            return bad("window, epochs and walks_per_node must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// Produces a `(node_count × d_node)` row-major table for one layer.
/// Node2Vec is the only implementation; the trait leaves room for others.
pub trait Embedder {
    fn embed_layer(&self, layer: &LayerGraph, seed: u64) -> Result<LayerEmbedding>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerEmbedding {
    pub rows: Vec<f32>,
    /// Mean skip-gram loss per epoch; empty for an edgeless layer.
    pub epoch_losses: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Node2Vec {
    pub config: Node2VecConfig,
}

impl Embedder for Node2Vec {
    fn embed_layer(&self, layer: &LayerGraph, seed: u64) -> Result<LayerEmbedding> {
        self.config.validate()?;
        let corpus = generate_walks(layer, &self.config, seed);
        let trained = train_skipgram(&corpus, layer.node_count(), &self.config, seed)?;
        let mut rows = trained.rows;
        let d = self.config.d_node;
        for node in 0..layer.node_count() {
            if layer.degree(node) == 0 {
                rows[node * d..(node + 1) * d].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        Ok(LayerEmbedding {
            rows,
            epoch_losses: trained.epoch_losses,
        })
    }
}

/// Per-layer stream seed, so that layers never share a random sequence.
pub(crate) fn layer_seed(seed: u64, layer: usize) -> u64 {
    seed ^ (layer as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
