//! Versioned checkpoint container.
//!
//! Layout: magic `MMCK`, `u32` version, `u64` header length, a JSON header,
//! then every tensor as little-endian `f64` values in header order. The
//! header lists each tensor's name, shape and element offset, so other
//! implementations can load parameters without this crate.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Element offset into the payload.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Named tensors plus a free-form JSON metadata document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Checkpoint {
    pub fn push_params<F: Scalar>(&mut self, prefix: &str, params: &ParamSet<F>) {
        for ((name, shape), values) in params.names().iter().zip(params.shapes()).zip(params.values()) {
            self.tensors.push((
                format!("{prefix}/{name}"),
                shape.clone(),
                values.iter().map(|v| v.as_f64()).collect(),
            ));
        }
    }

    pub fn push_buffers<F: Scalar>(&mut self, prefix: &str, params: &ParamSet<F>, buffers: &[Vec<F>]) {
        for ((name, shape), values) in params.names().iter().zip(params.shapes()).zip(buffers) {
            self.tensors.push((
                format!("{prefix}/{name}"),
                shape.clone(),
                values.iter().map(|v| v.as_f64()).collect(),
            ));
        }
    }

    /// Tensors whose names start with `prefix/`, with the prefix stripped.
    pub fn group(&self, prefix: &str) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let p = format!("{prefix}/");
        self.tensors
            .iter()
            .filter_map(|(n, s, v)| n.strip_prefix(&p).map(|n| (n.to_string(), s.clone(), v.clone())))
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let entries: Vec<TensorEntry> = self
            .tensors
            .iter()
            .map(|(name, shape, values)| {
                let e = TensorEntry {
                    name: name.clone(),
                    shape: shape.clone(),
                    offset,
                };
                offset += values.len();
                e
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            version: CHECKPOINT_VERSION,
            meta: self.meta.clone(),
            tensors: entries,
        })?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * offset);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, _, values) in &self.tensors {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Data("not an MMCK checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| Error::Data("truncated checkpoint header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        let payload = &bytes[16 + hlen..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let n: usize = e.shape.iter().product();
            let raw = payload
                .get(8 * e.offset..8 * (e.offset + n))
                .ok_or_else(|| Error::Data(format!("tensor {} exceeds payload", e.name)))?;
            let values = raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            tensors.push((e.name, e.shape, values));
        }
        Ok(Self {
            meta: header.meta,
            tensors,
        })
    }

    /// Writes to a temporary sibling then renames, so a failed write leaves any previous file intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes)
            .and_then(|_| f.sync_all())
            .map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
