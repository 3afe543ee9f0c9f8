//! Named-tensor checkpoints: a little-endian binary file plus a JSON
//! manifest (`<file>.json`) with shapes and the config fingerprint.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::binio::*;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub fingerprint: String,
    pub tensors: Vec<TensorEntry>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_checkpoint<S: Scalar>(store: &ParamStore<S>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    write_u32(&mut buf, CHECKPOINT_VERSION);
    write_u32(&mut buf, store.len() as u32);
    for p in store.iter() {
        write_str(&mut buf, &p.name);
        write_u32(&mut buf, p.value.rank() as u32);
        for &d in p.value.shape() {
            write_u64(&mut buf, d as u64);
        }
        for &v in p.value.data() {
            write_f32(&mut buf, v.as_f64() as f32);
        }
    }
    buf
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Vec<(String, Tensor<f32>)>, String> {
    let mut cur = bytes;
    if read_bytes(&mut cur, 4)? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = read_u32(&mut cur)?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = read_u32(&mut cur)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name = read_str(&mut cur)?;
        let rank = read_u32(&mut cur)? as usize;
        let shape = (0..rank)
            .map(|_| read_u64(&mut cur).map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| read_f32(&mut cur))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let t = Tensor::new(shape, data).map_err(|e| e.to_string())?;
        out.push((name, t));
    }
    if !cur.is_empty() {
        return Err(format!("{} trailing bytes", cur.len()));
    }
    Ok(out)
}

pub fn save_checkpoint<S: Scalar>(path: &Path, store: &ParamStore<S>, fingerprint: &str) -> Result<()> {
    std::fs::write(path, encode_checkpoint(store)).map_err(|e| Error::io(path, e))?;
    let manifest = CheckpointManifest {
        format: "mxck".into(),
        version: CHECKPOINT_VERSION,
        fingerprint: fingerprint.to_string(),
        tensors: store
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&mpath, json).map_err(|e| Error::io(mpath, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(Vec<(String, Tensor<f32>)>, CheckpointManifest)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = decode_checkpoint(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })?;
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let listed: Vec<_> = tensors.iter().map(|(n, t)| (n.as_str(), t.shape())).collect();
    let expected: Vec<_> = manifest
        .tensors
        .iter()
        .map(|e| (e.name.as_str(), e.shape.as_slice()))
        .collect();
    if listed != expected {
        return Err(Error::Format {
            path: mpath,
            message: "manifest does not match checkpoint contents".into(),
        });
    }
    Ok((tensors, manifest))
}

/// Copies checkpoint values into a store with identical names and shapes.
pub fn load_into<S: Scalar>(store: &mut ParamStore<S>, tensors: &[(String, Tensor<f32>)]) -> Result<()> {
    if tensors.len() != store.len() {
        return Err(Error::InvalidArgument(format!(
            "checkpoint has {} tensors, model has {}",
            tensors.len(),
            store.len()
        )));
    }
    for (p, (name, t)) in store.iter_mut().zip(tensors) {
        if &p.name != name || p.value.shape() != t.shape() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint tensor {name} {:?} does not match {} {:?}",
                t.shape(),
                p.name,
                p.value.shape()
            )));
        }
        p.value = t.cast();
    }
    Ok(())
}
