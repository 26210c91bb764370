//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"HGCLCKPT" | u32 version | u64 config_len | config (UTF-8 JSON)
//! u64 tensor_count
//! per tensor: u32 name_len | name | u64 rows | u64 cols | rows*cols f64
//! ```

use super::ParamStore;
use crate::matrix::Matrix;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"HGCLCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: corrupt checkpoint: {message}")]
    Corrupt { path: String, message: String },
}

/// Writes `params` and the producing configuration's JSON text.
pub fn save_checkpoint(path: &Path, params: &ParamStore, config_json: &str) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(config_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(config_json.as_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for (_, name, m) in params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&buf).map_err(io)?;
    f.flush().map_err(io)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.data.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// Reads a checkpoint back into a parameter store and the config JSON.
pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, String), CheckpointError> {
    let p = path.display().to_string();
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|source| CheckpointError::Io { path: p.clone(), source })?;
    let corrupt = |message: &str| CheckpointError::Corrupt { path: p.clone(), message: message.into() };
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(8) != Some(MAGIC.as_slice()) {
        return Err(corrupt("bad magic"));
    }
    match c.u32() {
        Some(VERSION) => {}
        _ => return Err(corrupt("unsupported version")),
    }
    let truncated = || corrupt("truncated");
    let len = c.u64().ok_or_else(truncated)? as usize;
    let config = std::str::from_utf8(c.take(len).ok_or_else(truncated)?).map_err(|_| corrupt("config is not UTF-8"))?.to_string();
    let count = c.u64().ok_or_else(truncated)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let n = c.u32().ok_or_else(truncated)? as usize;
        let name = std::str::from_utf8(c.take(n).ok_or_else(truncated)?).map_err(|_| corrupt("name is not UTF-8"))?.to_string();
        let rows = c.u64().ok_or_else(truncated)? as usize;
        let cols = c.u64().ok_or_else(truncated)? as usize;
        let bytes = rows.checked_mul(cols).and_then(|k| k.checked_mul(8)).ok_or_else(truncated)?;
        let payload = c.take(bytes).ok_or_else(truncated)?;
        let values = payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        store.insert(name, Matrix::from_vec(rows, cols, values));
    }
    if c.pos != data.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok((store, config))
}
