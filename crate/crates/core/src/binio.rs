//! Little-endian helpers shared by the binary file formats.

pub(crate) fn write_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn write_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn write_f32(buf: &mut Vec<u8>, v: f32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn write_str(buf: &mut Vec<u8>, s: &str) {
    write_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

pub(crate) fn read_bytes<'a>(cur: &mut &'a [u8], n: usize) -> Result<&'a [u8], String> {
    if cur.len() < n {
        return Err(format!("unexpected end of file (wanted {n} bytes, {} left)", cur.len()));
    }
    let (head, tail) = cur.split_at(n);
    *cur = tail;
    Ok(head)
}

pub(crate) fn read_u32(cur: &mut &[u8]) -> Result<u32, String> {
    let b = read_bytes(cur, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub(crate) fn read_u64(cur: &mut &[u8]) -> Result<u64, String> {
    let b = read_bytes(cur, 8)?;
    let mut a = [0u8; 8];
    a.copy_from_slice(b);
    Ok(u64::from_le_bytes(a))
}

pub(crate) fn read_f32(cur: &mut &[u8]) -> Result<f32, String> {
    let b = read_bytes(cur, 4)?;
    Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub(crate) fn read_str(cur: &mut &[u8]) -> Result<String, String> {
    let n = read_u32(cur)? as usize;
    let b = read_bytes(cur, n)?;
    String::from_utf8(b.to_vec()).map_err(|e| format!("invalid utf-8 string: {e}"))
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn fingerprint<T: serde::Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}
