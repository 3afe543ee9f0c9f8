//! Common-neighbours heuristic over the auxiliary layers.

use crate::error::Result;
use crate::graph::{MultiplexGraph, NodePair};

/// `|N(u) ∩ N(v)|` on the union of every layer except `target`, min-max
/// normalized over `pairs` (all zero when the counts are constant).
pub fn baseline_common_neighbors(pairs: &[NodePair], graph: &MultiplexGraph, target: usize) -> Result<Vec<f64>> {
    graph.check_layer(target)?;
    let n = graph.node_count();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (m, layer) in graph.layers().iter().enumerate() {
        if m == target {
            continue;
        }
        for node in 0..n {
            nbrs[node].extend_from_slice(layer.neighbors(node));
        }
    }
    for list in &mut nbrs {
        list.sort_unstable();
        list.dedup();
    }
    let counts: Vec<f64> = pairs
        .iter()
        .map(|p| sorted_intersection(&nbrs[p.u], &nbrs[p.v]) as f64)
        .collect();
    let lo = counts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(counts
        .iter()
        .map(|&c| if hi > lo { (c - lo) / (hi - lo) } else { 0.0 })
        .collect())
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                k += 1;
                i += 1;
                j += 1;
            }
        }
    }
    k
}
