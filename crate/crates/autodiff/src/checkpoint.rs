//! Flat container of named arrays.
//!
//! Layout: one line of compact JSON
//! `{"version":1,"names":[...],"shapes":[[...],...],"dtype":"f64","meta":{...}}`
//! terminated by `\n`, followed by the raw little-endian `f64` data of every
//! array in name order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{AdError, Array, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    dtype: String,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub arrays: Vec<(String, Array)>,
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Checkpoint {
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Array> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    /// Entries whose names start with none of `prefixes`.
    pub fn without_prefixes(&self, prefixes: &[&str]) -> Vec<(String, Array)> {
        self.arrays
            .iter()
            .filter(|(n, _)| !prefixes.iter().any(|p| n.starts_with(p)))
            .cloned()
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            version: CHECKPOINT_VERSION,
            names: self.arrays.iter().map(|(n, _)| n.clone()).collect(),
            shapes: self.arrays.iter().map(|(_, a)| a.shape().to_vec()).collect(),
            dtype: "f64".into(),
            meta: self.meta.clone(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for (_, a) in &self.arrays {
            for x in a.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| AdError::Checkpoint("missing header terminator".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| AdError::Checkpoint(format!("bad header: {e}")))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(AdError::Checkpoint(format!("unsupported version {}", header.version)));
        }
        if header.dtype != "f64" {
            return Err(AdError::Checkpoint(format!("unsupported dtype {}", header.dtype)));
        }
        if header.names.len() != header.shapes.len() {
            return Err(AdError::Checkpoint("names and shapes differ in length".into()));
        }
        let mut body = &bytes[nl + 1..];
        let mut arrays = Vec::with_capacity(header.names.len());
        for (name, shape) in header.names.into_iter().zip(header.shapes) {
            let len: usize = shape.iter().product();
            if body.len() < len * 8 {
                return Err(AdError::Checkpoint(format!("truncated data for `{name}`")));
            }
            let data = body[..len * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            body = &body[len * 8..];
            arrays.push((name, Array::new(shape, data)?));
        }
        if !body.is_empty() {
            return Err(AdError::Checkpoint(format!("{} trailing bytes", body.len())));
        }
        Ok(Checkpoint {
            meta: header.meta,
            arrays,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| {
            AdError::Checkpoint(format!("cannot read {}: {e}", path.display()))
        })?;
        Checkpoint::from_bytes(&bytes)
    }
}
