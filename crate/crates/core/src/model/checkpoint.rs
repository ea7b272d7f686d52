// SPDX-License-Identifier: MIT OR Apache-2.0

//! Checkpoint file: `SDLSCKPT`, little-endian `u32` header length, JSON
//! header, then every parameter as little-endian `f32` in layout order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layout::ParamEntry;
use super::{ToyModel, ToyModelConfig, TrainingMeta, Vocab};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SDLSCKPT";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ToyModelConfig,
    meta: TrainingMeta,
    vocab: Vocab,
    params: Vec<ParamEntry>,
    dtype: String,
    checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

pub fn save_checkpoint(model: &ToyModel, path: &Path, provenance: Option<serde_json::Value>) -> Result<String> {
    let blob = model.param_blob();
    let checksum = hex::encode(Sha256::digest(&blob));
    let header = Header {
        format_version: 1,
        config: model.config().clone(),
        meta: model.meta.clone(),
        vocab: model.vocab().clone(),
        params: model.layout().entries.clone(),
        dtype: "f32".into(),
        checksum: checksum.clone(),
        provenance,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + blob.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    Ok(checksum)
}

pub fn load_checkpoint(path: &Path) -> Result<ToyModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    let blob = &bytes[12 + hlen..];
    if hex::encode(Sha256::digest(blob)) != header.checksum {
        return Err(bad("parameter checksum mismatch"));
    }
    if header.dtype != "f32" {
        return Err(bad("unsupported dtype"));
    }
    let expected: usize = header.params.iter().map(ParamEntry::len).sum();
    if blob.len() != expected * 4 {
        return Err(bad("parameter blob length does not match layout"));
    }
    let mut offset = 0;
    let mut params = Vec::with_capacity(header.params.len());
    for e in &header.params {
        let data: Vec<f64> = blob[offset..offset + e.len() * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        offset += e.len() * 4;
        params.push(Matrix::from_vec(e.rows, e.cols, data)?);
    }
    let model = ToyModel::from_parts(header.config, header.vocab, params, header.meta)?;
    if model.layout().entries != header.params {
        return Err(bad("parameter order does not match layout"));
    }
    Ok(model)
}
