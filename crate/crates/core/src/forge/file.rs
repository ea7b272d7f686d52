// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON vector files with an inline base64 float64 payload.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Geometry, Provenance, SteeringVector, VectorKind};
use crate::error::{Error, Result};
use crate::linalg::Vector;

pub const VECTOR_FORMAT: &str = "sdls-vector/1";

#[derive(Serialize, Deserialize)]
struct VectorFile {
    format: String,
    kind: VectorKind,
    name: String,
    dim: usize,
    geometry: Geometry,
    norm: f64,
    provenance: Provenance,
    dtype: String,
    /// Little-endian f64 values, base64-encoded.
    data: String,
}

fn bad(field: &'static str, message: impl Into<String>) -> Error {
    Error::Bundle {
        field,
        message: message.into(),
    }
}

pub fn save_vector(v: &SteeringVector, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = v.v.iter().flat_map(|x| x.to_le_bytes()).collect();
    let file = VectorFile {
        format: VECTOR_FORMAT.into(),
        kind: v.kind,
        name: v.name(),
        dim: v.v.dim(),
        geometry: v.geometry,
        norm: v.norm(),
        provenance: v.provenance.clone(),
        dtype: "f64".into(),
        data: STANDARD.encode(bytes),
    };
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_vector(path: &Path) -> Result<SteeringVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: VectorFile = serde_json::from_str(&text)?;
    if file.format != VECTOR_FORMAT {
        return Err(bad("format", format!("unsupported format {:?}", file.format)));
    }
    if file.dtype != "f64" {
        return Err(bad("dtype", format!("expected f64, found {}", file.dtype)));
    }
    let bytes = STANDARD
        .decode(file.data.as_bytes())
        .map_err(|e| bad("data", e.to_string()))?;
    if bytes.len() != file.dim * 8 {
        return Err(bad(
            "data",
            format!("{} bytes for declared dim {}", bytes.len(), file.dim),
        ));
    }
    if file.dim != file.geometry.dim() {
        return Err(bad(
            "dim",
            format!("{} does not match geometry {:?}", file.dim, file.geometry),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let mut v = SteeringVector::new(file.kind, file.geometry, Vector(values))?;
    let tol = 1e-9 * file.norm.abs().max(1.0);
    if (v.norm() - file.norm).abs() > tol {
        return Err(bad(
            "norm",
            format!("header says {}, payload has {}", file.norm, v.norm()),
        ));
    }
    v.provenance = file.provenance;
    Ok(v)
}
