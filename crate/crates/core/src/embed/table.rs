//! Per-layer embedding tables and their on-disk format.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Node2VecConfig;
use crate::binio::*;
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"MXEM";
pub const EMBEDDING_VERSION: u32 = 1;
/// Bytes before the first row: magic plus four u32 fields.
pub const EMBEDDING_HEADER_BYTES: usize = 4 + 4 * 4;

/// One `node_count × d_node` matrix per layer, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    node_count: usize,
    d_node: usize,
    layers: Vec<Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(node_count: usize, d_node: usize, layers: Vec<Vec<f32>>) -> Result<Self> {
        if let Some((m, bad)) = layers.iter().enumerate().find(|(_, l)| l.len() != node_count * d_node) {
            return Err(Error::shape(
                "embedding table",
                format!("layer {m} has {} values, expected {node_count}×{d_node}", bad.len()),
            ));
        }
        if layers.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                op: "embedding table".into(),
            });
        }
        Ok(EmbeddingTable {
            node_count,
            d_node,
            layers,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn d_node(&self) -> usize {
        self.d_node
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, m: usize) -> &[f32] {
        &self.layers[m]
    }

    /// Element-wise mean of every layer except `excluded`.
    pub fn mean_excluding(&self, excluded: usize) -> Vec<f32> {
        let mut out = vec![0.0f32; self.node_count * self.d_node];
        let count = self.layers.len().saturating_sub(1).max(1) as f32;
        for (_, layer) in self.layers.iter().enumerate().filter(|(m, _)| *m != excluded) {
            for (o, &x) in out.iter_mut().zip(layer) {
                *o += x / count;
            }
        }
        out
    }

    pub fn row(&self, m: usize, node: usize) -> &[f32] {
        &self.layers[m][node * self.d_node..(node + 1) * self.d_node]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(EMBEDDING_HEADER_BYTES + 4 * self.layers.len() * self.node_count * self.d_node);
        buf.extend_from_slice(EMBEDDING_MAGIC);
        write_u32(&mut buf, EMBEDDING_VERSION);
        write_u32(&mut buf, self.node_count as u32);
        write_u32(&mut buf, self.d_node as u32);
        write_u32(&mut buf, self.layers.len() as u32);
        for &x in self.layers.iter().flatten() {
            write_f32(&mut buf, x);
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut cur = bytes;
        if read_bytes(&mut cur, 4)? != EMBEDDING_MAGIC {
            return Err("bad magic".into());
        }
        let version = read_u32(&mut cur)?;
        if version != EMBEDDING_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let n = read_u32(&mut cur)? as usize;
        let d = read_u32(&mut cur)? as usize;
        let l = read_u32(&mut cur)? as usize;
        if cur.len() != 4 * n * d * l {
            return Err(format!("expected {} value bytes, found {}", 4 * n * d * l, cur.len()));
        }
        let mut layers = Vec::with_capacity(l);
        for _ in 0..l {
            layers.push((0..n * d).map(|_| read_f32(&mut cur)).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        EmbeddingTable::new(n, d, layers).map_err(|e| e.to_string())
    }
}

/// JSON metadata written next to an embedding file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub fingerprint: String,
    pub node2vec: Node2VecConfig,
    pub layer_names: Vec<String>,
    /// Layer whose table was trained on its training edges only.
    pub target_layer: Option<usize>,
    pub split_seed: Option<u64>,
    pub epoch_losses: Vec<Vec<f64>>,
}

impl EmbeddingSidecar {
    pub fn compute_fingerprint(
        node2vec: &Node2VecConfig,
        layer_names: &[String],
        target_layer: Option<usize>,
        split_seed: Option<u64>,
    ) -> String {
        crate::fingerprint(&(node2vec, layer_names, target_layer, split_seed))
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_embeddings(path: &Path, table: &EmbeddingTable, sidecar: &EmbeddingSidecar) -> Result<()> {
    std::fs::write(path, table.to_bytes()).map_err(|e| Error::io(path, e))?;
    let spath = sidecar_path(path);
    std::fs::write(&spath, serde_json::to_string_pretty(sidecar)?).map_err(|e| Error::io(spath, e))
}

pub fn load_embeddings(path: &Path) -> Result<(EmbeddingTable, EmbeddingSidecar)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let table = EmbeddingTable::from_bytes(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })?;
    let spath = sidecar_path(path);
    let text = std::fs::read_to_string(&spath).map_err(|e| Error::io(&spath, e))?;
    let sidecar: EmbeddingSidecar = serde_json::from_str(&text)?;
    if sidecar.node2vec.d_node != table.d_node() || sidecar.layer_names.len() != table.layer_count() {
        return Err(Error::Format {
            path: spath,
            message: "sidecar does not match the embedding file".into(),
        });
    }
    Ok((table, sidecar))
}
