//! Parameter checkpoints: the magic `CGRD0001`, then until end of file one
//! record per tensor — name length (`u64` LE), UTF-8 name, rank (`u64` LE),
//! extents (`u64` LE each) and the data as `f64` LE.

use std::fs;
use std::path::Path;

use bbsp_core::model::{ModelParams, Tensor, HEAD_WEIGHT};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CGRD0001";
const MAX_NAME: u64 = 256;
const MAX_RANK: u64 = 8;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for (name, t) in params.tensors() {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u64).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len())?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Parses checkpoint bytes; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "header", "missing CGRD0001 magic"));
    }
    let mut cur = Cursor { bytes, pos: 8 };
    let mut tensors = Vec::new();
    while cur.pos < bytes.len() {
        let i = tensors.len();
        let record = |name: Option<&str>| match name {
            Some(n) => format!("tensor {i} ({n})"),
            None => format!("tensor {i}"),
        };
        let truncated = |name: Option<&str>, what: &str| {
            Error::format(path, record(name), format!("truncated {what}"))
        };

        let len = cur.u64().ok_or_else(|| truncated(None, "name length"))?;
        if len == 0 || len > MAX_NAME {
            return Err(Error::format(
                path,
                record(None),
                format!("name length {len} out of range"),
            ));
        }
        let name = cur
            .take(len as usize)
            .ok_or_else(|| truncated(None, "name"))?;
        let name = std::str::from_utf8(name)
            .map_err(|_| Error::format(path, record(None), "name is not UTF-8"))?
            .to_string();
        let rank = cur.u64().ok_or_else(|| truncated(Some(&name), "rank"))?;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::format(
                path,
                record(Some(&name)),
                format!("rank {rank} out of range"),
            ));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            dims.push(cur.u64().ok_or_else(|| truncated(Some(&name), "extents"))?);
        }
        let n = dims
            .iter()
            .try_fold(1u64, |a, &d| a.checked_mul(d))
            .filter(|&n| {
                n.checked_mul(8)
                    .is_some_and(|b| b <= (bytes.len() - cur.pos) as u64)
            })
            .ok_or_else(|| truncated(Some(&name), "data"))?;
        let data: Vec<f64> = cur
            .take(n as usize * 8)
            .ok_or_else(|| truncated(Some(&name), "data"))?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let dims = dims.into_iter().map(|d| d as usize).collect();
        tensors.push((name, Tensor::new(dims, data)?));
    }
    if tensors.is_empty() {
        return Err(Error::format(
            path,
            "tensor 0",
            "checkpoint holds no tensors",
        ));
    }
    Ok(ModelParams::from_tensors(tensors))
}

pub fn write(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Grid side and presence of the choice row, from the head's shape.
pub fn head_shape(params: &ModelParams, path: &Path) -> Result<(usize, bool)> {
    let head = params
        .get(HEAD_WEIGHT)
        .ok_or_else(|| Error::format(path, HEAD_WEIGHT, "tensor missing"))?;
    let bad = || {
        Error::format(
            path,
            HEAD_WEIGHT,
            format!("shape {:?} is not a grid head", head.dims),
        )
    };
    let [rows, cols] = head.dims[..] else {
        return Err(bad());
    };
    let k = (cols as f64).sqrt().round() as usize;
    if k * k != cols || !(rows == cols || rows == cols + 1) {
        return Err(bad());
    }
    Ok((k, rows == cols + 1))
}
