//! Second-order biased random walks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Node2VecConfig;
use crate::graph::LayerGraph;

pub type Walk = Vec<u32>;

/// Next-hop probabilities from `cur`, in neighbour order. `prev` is the node
/// the walk arrived from; `None` on the first step (uniform).
pub fn transition_probabilities(layer: &LayerGraph, prev: Option<usize>, cur: usize, p: f64, q: f64) -> Vec<f64> {
    let nbrs = layer.neighbors(cur);
    let weights: Vec<f64> = match prev {
        None => vec![1.0; nbrs.len()],
        Some(prev) => nbrs
            .iter()
            .map(|&x| {
                if x == prev {
                    1.0 / p
                } else if layer.has_edge(prev, x) {
                    1.0
                } else {
                    1.0 / q
                }
            })
            .collect(),
    };
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Every normalized distribution drawn from during a walk run.
#[derive(Clone, Debug, Default)]
pub struct TransitionLog {
    pub distributions: Vec<Vec<f64>>,
}

pub fn generate_walks(layer: &LayerGraph, cfg: &Node2VecConfig, seed: u64) -> Vec<Walk> {
    generate_walks_logged(layer, cfg, seed, None)
}

pub fn generate_walks_logged(
    layer: &LayerGraph,
    cfg: &Node2VecConfig,
    seed: u64,
    mut log: Option<&mut TransitionLog>,
) -> Vec<Walk> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<usize> = (0..layer.node_count()).filter(|&n| layer.degree(n) > 0).collect();
    let mut corpus = Vec::with_capacity(starts.len() * cfg.walks_per_node);
    for _ in 0..cfg.walks_per_node {
        starts.shuffle(&mut rng);
        for &start in &starts {
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start as u32);
            let mut prev = None;
            let mut cur = start;
            while walk.len() < cfg.walk_length {
                let probs = transition_probabilities(layer, prev, cur, cfg.p, cfg.q);
                let next = layer.neighbors(cur)[sample_index(&probs, &mut rng)];
                if let Some(log) = log.as_deref_mut() {
                    log.distributions.push(probs);
                }
                walk.push(next as u32);
                prev = Some(cur);
                cur = next;
            }
            corpus.push(walk);
        }
    }
    corpus
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> LayerGraph {
        LayerGraph::from_pairs(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn star_center_is_uniform() {
        let star = LayerGraph::from_pairs(5, (1..5).map(|i| (0, i))).unwrap();
        for prev in [None, Some(1)] {
            let probs = transition_probabilities(&star, prev, 0, 1.0, 1.0);
            assert!(probs.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn return_parameter_weights_backtracking() {
        let probs = transition_probabilities(&path3(), Some(0), 1, 10.0, 1.0);
        let expected = 0.1 / (0.1 + 1.0);
        assert!((probs[0] - expected).abs() < 1e-12);
        assert!((probs[0] - 0.0909).abs() < 1e-4);
    }

    #[test]
    fn triangle_neighbours_get_unit_weight() {
        // 0-1-2 triangle plus 1-3: from 0 to 1, next hop 2 is distance one from 0
        let g = LayerGraph::from_pairs(4, [(0, 1), (1, 2), (0, 2), (1, 3)]).unwrap();
        let probs = transition_probabilities(&g, Some(0), 1, 2.0, 4.0);
        let w = [0.5, 1.0, 0.25];
        let total: f64 = w.iter().sum();
        for (p, w) in probs.iter().zip(w) {
            assert!((p - w / total).abs() < 1e-15);
        }
    }

    #[test]
    fn edgeless_layer_gives_empty_corpus() {
        let g = LayerGraph::empty(4);
        assert!(generate_walks(&g, &Node2VecConfig::default(), 1).is_empty());
    }

    #[test]
    fn walks_follow_edges_and_distributions_normalize() {
        let g = LayerGraph::from_pairs(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]).unwrap();
        let cfg = Node2VecConfig {
            p: 0.5,
            q: 2.0,
            walk_length: 12,
            walks_per_node: 4,
            ..Default::default()
        };
        let mut log = TransitionLog::default();
        let corpus = generate_walks_logged(&g, &cfg, 3, Some(&mut log));
        assert_eq!(corpus.len(), 5 * 4, "node 5 is isolated and starts no walk");
        for walk in &corpus {
            assert_eq!(walk.len(), 12);
            for w in walk.windows(2) {
                assert!(g.has_edge(w[0] as usize, w[1] as usize));
            }
        }
        assert_eq!(log.distributions.len(), 20 * 11);
        for d in &log.distributions {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(corpus, generate_walks(&g, &cfg, 3));
        assert_ne!(corpus, generate_walks(&g, &cfg, 4));
    }
}
