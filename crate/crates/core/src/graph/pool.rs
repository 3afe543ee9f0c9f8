//! Union–Set candidate pool and target-layer labeling.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{MultiplexGraph, NodePair};
use crate::error::{Error, Result};

/// Every node pair observed as an edge in at least one layer, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePool {
    pairs: Vec<NodePair>,
}

impl CandidatePool {
    pub fn pairs(&self) -> &[NodePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub pair: NodePair,
    pub label: bool,
    pub target_layer: usize,
}

pub fn build_union_pool(graph: &MultiplexGraph) -> CandidatePool {
    let set: BTreeSet<NodePair> = graph
        .layers()
        .iter()
        .flat_map(|l| l.edges().iter().copied())
        .collect();
    CandidatePool {
        pairs: set.into_iter().collect(),
    }
}

/// `l * N * (N - 1) / 2`, the number of possible intra-layer edges.
pub fn max_edge_count(layers: u64, nodes: u64) -> Result<u64> {
    if layers == 0 || nodes == 0 {
        return Err(Error::InvalidArgument(
            "layer and node counts must be at least 1".into(),
        ));
    }
    // N(N-1) is always even, so halve the even factor first.
    let (a, b) = if nodes % 2 == 0 {
        (nodes / 2, nodes - 1)
    } else {
        (nodes, (nodes - 1) / 2)
    };
    a.checked_mul(b)
        .and_then(|pairs| pairs.checked_mul(layers))
        .ok_or_else(|| {
            Error::Overflow(format!("max edge count for l={layers}, N={nodes} exceeds u64"))
        })
}

/// Labels each pool pair 1 iff it is an edge of the target layer.
pub fn label_for_target(
    pool: &CandidatePool,
    graph: &MultiplexGraph,
    target: usize,
) -> Result<Vec<LabeledExample>> {
    graph.check_layer(target)?;
    let layer = graph.layer(target);
    Ok(pool
        .pairs
        .iter()
        .map(|&pair| LabeledExample {
            pair,
            label: layer.contains(pair),
            target_layer: target,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    // a=0 b=1 c=2 d=3
    fn sample() -> MultiplexGraph {
        MultiplexGraph::from_layer_pairs(4, vec![vec![(0, 1), (1, 2)], vec![(0, 1), (2, 3)]])
            .unwrap()
    }

    #[test]
    fn union_of_two_layers() {
        let pool = build_union_pool(&sample());
        assert_eq!(
            pool.pairs(),
            &[NodePair::new(0, 1), NodePair::new(1, 2), NodePair::new(2, 3)]
        );
    }

    #[test]
    fn identical_layers_union_is_idempotent() {
        let edges = vec![(0, 1), (1, 2), (0, 2), (2, 3)];
        let g = MultiplexGraph::from_layer_pairs(4, vec![edges.clone(), edges.clone(), edges])
            .unwrap();
        assert_eq!(build_union_pool(&g).len(), 4);
    }

    #[test]
    fn labels_follow_target_membership() {
        let g = sample();
        let pool = build_union_pool(&g);
        let labels: Vec<bool> = label_for_target(&pool, &g, 1)
            .unwrap()
            .iter()
            .map(|e| e.label)
            .collect();
        assert_eq!(labels, vec![true, false, true]);
        assert!(label_for_target(&pool, &g, 2).is_err());
    }

    #[test]
    fn target_equal_to_union_is_all_positive() {
        let g = MultiplexGraph::from_layer_pairs(3, vec![vec![(0, 1), (1, 2)], vec![(0, 1)]])
            .unwrap();
        let pool = build_union_pool(&g);
        assert!(label_for_target(&pool, &g, 0).unwrap().iter().all(|e| e.label));
    }

    #[test]
    fn max_edges() {
        assert_eq!(max_edge_count(3, 29).unwrap(), 1218);
        assert_eq!(max_edge_count(5, 61).unwrap(), 9150);
        assert_eq!(max_edge_count(1, 2).unwrap(), 1);
        assert_eq!(max_edge_count(1, 1).unwrap(), 0);
        assert!(max_edge_count(0, 5).is_err());
        assert!(matches!(max_edge_count(u64::MAX, 10), Err(Error::Overflow(_))));
        assert!(matches!(max_edge_count(2, u64::MAX), Err(Error::Overflow(_))));
    }
}
