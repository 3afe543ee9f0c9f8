//! Graph summary JSON and a compact binary snapshot of a parsed multiplex.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_union_pool, LayerGraph, MultiplexGraph};
use crate::binio::{read_bytes, read_str, read_u32, write_str, write_u32};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub name: String,
    pub edges: usize,
}

/// `{nodes, layers: [{name, edges}], union_size}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub layers: Vec<LayerSummary>,
    pub union_size: usize,
}

impl GraphSummary {
    pub fn of(graph: &MultiplexGraph) -> Self {
        GraphSummary {
            nodes: graph.node_count(),
            layers: graph
                .layer_names()
                .iter()
                .zip(graph.layers())
                .map(|(name, layer)| LayerSummary {
                    name: name.clone(),
                    edges: layer.edge_count(),
                })
                .collect(),
            union_size: build_union_pool(graph).len(),
        }
    }

    pub fn total_edges(&self) -> usize {
        self.layers.iter().map(|l| l.edges).sum()
    }
}

const GRAPH_MAGIC: &[u8; 4] = b"MXGR";
const GRAPH_VERSION: u32 = 1;

pub fn write_graph_binary(graph: &MultiplexGraph, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(GRAPH_MAGIC);
    write_u32(&mut buf, GRAPH_VERSION);
    write_u32(&mut buf, graph.node_count() as u32);
    write_u32(&mut buf, graph.layer_count() as u32);
    for label in graph.node_labels() {
        write_str(&mut buf, label);
    }
    for (name, layer) in graph.layer_names().iter().zip(graph.layers()) {
        write_str(&mut buf, name);
        write_u32(&mut buf, layer.edge_count() as u32);
        for e in layer.edges() {
            write_u32(&mut buf, e.u as u32);
            write_u32(&mut buf, e.v as u32);
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

pub fn read_graph_binary(path: &Path) -> Result<MultiplexGraph> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let fail = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut cur = bytes.as_slice();
    if read_bytes(&mut cur, 4).map_err(&fail)? != GRAPH_MAGIC {
        return Err(fail("not a graph snapshot (bad magic)".into()));
    }
    let version = read_u32(&mut cur).map_err(&fail)?;
    if version != GRAPH_VERSION {
        return Err(fail(format!("unsupported graph snapshot version {version}")));
    }
    let nodes = read_u32(&mut cur).map_err(&fail)? as usize;
    let layers = read_u32(&mut cur).map_err(&fail)? as usize;
    let labels = (0..nodes)
        .map(|_| read_str(&mut cur))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(&fail)?;
    let mut names = Vec::with_capacity(layers);
    let mut graphs = Vec::with_capacity(layers);
    for _ in 0..layers {
        names.push(read_str(&mut cur).map_err(&fail)?);
        let count = read_u32(&mut cur).map_err(&fail)? as usize;
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let u = read_u32(&mut cur).map_err(&fail)? as usize;
            let v = read_u32(&mut cur).map_err(&fail)? as usize;
            pairs.push((u, v));
        }
        graphs.push(LayerGraph::from_pairs(nodes, pairs)?);
    }
    if !cur.is_empty() {
        return Err(fail(format!("{} trailing bytes", cur.len())));
    }
    MultiplexGraph::new(labels, names, graphs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_and_binary_round_trip() {
        let g = MultiplexGraph::from_layer_pairs(4, vec![vec![(0, 1), (1, 2)], vec![(0, 1), (2, 3)]])
            .unwrap();
        let s = GraphSummary::of(&g);
        assert_eq!(s.nodes, 4);
        assert_eq!(s.union_size, 3);
        assert_eq!(s.total_edges(), 4);
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["layers"][1]["edges"], 2);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        write_graph_binary(&g, &path).unwrap();
        assert_eq!(read_graph_binary(&path).unwrap(), g);
    }
}
