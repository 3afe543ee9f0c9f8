//! Multiplex graph data model: a shared node vocabulary and one undirected,
//! simple edge set per layer.

mod io;
mod parse;
mod pool;
mod split;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_graph_binary, write_graph_binary, GraphSummary, LayerSummary};
pub use parse::{parse_multiplex_edgelist, serialize_layer_first, EdgeListFormat, ParseReport, Parsed};
pub use pool::{build_union_pool, label_for_target, max_edge_count, CandidatePool, LabeledExample};
pub use split::{
    inductive_node_split, stratified_split, SplitBundle, SplitProtocol, SplitRatios,
};

/// Unordered node pair stored with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodePair {
    pub u: usize,
    pub v: usize,
}

impl NodePair {
    /// Canonicalizes the endpoints. Panics on a self-pair.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "self-pairs are not valid node pairs");
        if a < b {
            NodePair { u: a, v: b }
        } else {
            NodePair { u: b, v: a }
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.u == node || self.v == node
    }
}

/// One relation of the multiplex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerGraph {
    edges: Vec<NodePair>,
    adjacency: Vec<Vec<usize>>,
}

impl LayerGraph {
    /// Builds a layer over `node_count` nodes. Duplicate pairs collapse;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_pairs<I>(node_count: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a >= node_count || b >= node_count {
                return Err(Error::Structure(format!(
                    "edge ({a}, {b}) references a node outside 0..{node_count}"
                )));
            }
            if a == b {
                return Err(Error::Structure(format!("self-loop on node {a}")));
            }
            set.insert(NodePair::new(a, b));
        }
        let edges: Vec<NodePair> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for e in &edges {
            adjacency[e.u].push(e.v);
            adjacency[e.v].push(e.u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(LayerGraph { edges, adjacency })
    }

    pub fn empty(node_count: usize) -> Self {
        LayerGraph {
            edges: Vec::new(),
            adjacency: vec![Vec::new(); node_count],
        }
    }

    /// Edges sorted lexicographically.
    pub fn edges(&self) -> &[NodePair] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Sorted, duplicate-free neighbor list.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b
            && a < self.adjacency.len()
            && b < self.adjacency.len()
            && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn contains(&self, pair: NodePair) -> bool {
        self.edges.binary_search(&pair).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplexGraph {
    node_labels: Vec<String>,
    layer_names: Vec<String>,
    layers: Vec<LayerGraph>,
}

impl MultiplexGraph {
    /// Requires at least two layers and one layer name per layer.
    pub fn new(
        node_labels: Vec<String>,
        layer_names: Vec<String>,
        layers: Vec<LayerGraph>,
    ) -> Result<Self> {
        if node_labels.is_empty() {
            return Err(Error::Structure("a multiplex needs at least one node".into()));
        }
        if layers.len() < 2 {
            return Err(Error::Structure(format!(
                "a multiplex needs at least 2 layers, found {}",
                layers.len()
            )));
        }
        if layer_names.len() != layers.len() {
            return Err(Error::Structure(format!(
                "{} layer names for {} layers",
                layer_names.len(),
                layers.len()
            )));
        }
        if let Some(bad) = layers.iter().position(|l| l.node_count() != node_labels.len()) {
            return Err(Error::Structure(format!(
                "layer {bad} is sized for {} nodes, graph has {}",
                layers[bad].node_count(),
                node_labels.len()
            )));
        }
        Ok(MultiplexGraph {
            node_labels,
            layer_names,
            layers,
        })
    }

    /// Convenience constructor from raw per-layer pair lists; labels are the
    /// decimal node ids and layer names are `1..=l`.
    pub fn from_layer_pairs(node_count: usize, layers: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        let labels = (0..node_count).map(|i| i.to_string()).collect();
        let names = (1..=layers.len()).map(|i| i.to_string()).collect();
        let layers = layers
            .into_iter()
            .map(|pairs| LayerGraph::from_pairs(node_count, pairs))
            .collect::<Result<Vec<_>>>()?;
        MultiplexGraph::new(labels, names, layers)
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    pub fn layers(&self) -> &[LayerGraph] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &LayerGraph {
        &self.layers[index]
    }

    pub fn total_edges(&self) -> usize {
        self.layers.iter().map(LayerGraph::edge_count).sum()
    }

    pub fn check_layer(&self, index: usize) -> Result<()> {
        if index < self.layers.len() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "layer index {index} out of range for {} layers",
                self.layers.len()
            )))
        }
    }
}
