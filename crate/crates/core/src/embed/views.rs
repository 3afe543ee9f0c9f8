//! Multi-view edge sequences built from per-layer tables.

use super::EmbeddingTable;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::NodePair;
use crate::scalar::Scalar;

/// Views of one pair across layers; view `m` is `[emb_m(u) ‖ emb_m(v)]`
/// with `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeViewSequence {
    pub pair: NodePair,
    pub views: Vec<Vec<f32>>,
}

impl EdgeViewSequence {
    pub fn d_model(&self) -> usize {
        self.views.first().map_or(0, |v| v.len())
    }
}

fn check_pair(pair: NodePair, table: &EmbeddingTable) -> Result<()> {
    if pair.v >= table.node_count() {
        return Err(Error::InvalidArgument(format!(
            "pair ({}, {}) outside a table of {} nodes",
            pair.u,
            pair.v,
            table.node_count()
        )));
    }
    Ok(())
}

pub fn build_edge_views(pair: NodePair, table: &EmbeddingTable) -> Result<EdgeViewSequence> {
    check_pair(pair, table)?;
    let views = (0..table.layer_count())
        .map(|m| {
            let mut v = table.row(m, pair.u).to_vec();
            v.extend_from_slice(table.row(m, pair.v));
            v
        })
        .collect();
    Ok(EdgeViewSequence { pair, views })
}

/// Stacks the views of `pairs` into a `[B, l, 2·d_node]` tensor.
pub fn edge_view_tensor<S: Scalar>(pairs: &[NodePair], table: &EmbeddingTable) -> Result<Tensor<S>> {
    let (l, d) = (table.layer_count(), table.d_node());
    let mut data = Vec::with_capacity(pairs.len() * l * 2 * d);
    for &pair in pairs {
        check_pair(pair, table)?;
        for m in 0..l {
            for node in [pair.u, pair.v] {
                data.extend(table.row(m, node).iter().map(|&x| S::of(x as f64)));
            }
        }
    }
    Tensor::new([pairs.len(), l, 2 * d], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(l: usize, n: usize, d: usize) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layers = (0..l)
            .map(|_| (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect();
        EmbeddingTable::new(n, d, layers).unwrap()
    }

    #[test]
    fn view_shapes() {
        let t = table(3, 5, 64);
        let s = build_edge_views(NodePair::new(4, 1), &t).unwrap();
        assert_eq!(s.views.len(), 3);
        assert!(s.views.iter().all(|v| v.len() == 128));
        assert_eq!(s.pair, NodePair::new(1, 4));
    }

    #[test]
    fn isolated_node_gives_zero_half() {
        let mut layers: Vec<Vec<f32>> = vec![vec![1.0; 3 * 2]; 3];
        layers[1][2..4].iter_mut().for_each(|x| *x = 0.0); // node 1 isolated in layer 1
        let t = EmbeddingTable::new(3, 2, layers).unwrap();
        let s = build_edge_views(NodePair::new(1, 2), &t).unwrap();
        assert_eq!(&s.views[1][..2], &[0.0, 0.0]);
        assert_eq!(&s.views[1][2..], &[1.0, 1.0]);
    }

    #[test]
    fn views_match_table_rows() {
        let t = table(4, 9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = rng.random_range(0..9);
            let b = (a + rng.random_range(1..9)) % 9;
            let pair = NodePair::new(a, b);
            let s = build_edge_views(pair, &t).unwrap();
            let tensor = edge_view_tensor::<f64>(&[pair], &t).unwrap();
            for m in 0..4 {
                let direct: Vec<f32> = t.row(m, pair.u).iter().chain(t.row(m, pair.v)).copied().collect();
                assert_eq!(s.views[m], direct);
                let row: Vec<f32> = tensor.data()[m * 6..(m + 1) * 6].iter().map(|&x| x as f32).collect();
                assert_eq!(row, direct);
            }
        }
        assert!(build_edge_views(NodePair::new(0, 9), &t).is_err());
    }
}
