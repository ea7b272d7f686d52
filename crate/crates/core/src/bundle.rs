// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation bundles: many multi-layer vectors in one file.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! b"SDLSBNDL" | u32 manifest length | UTF-8 JSON manifest | f32 blob
//! ```
//!
//! Each index entry points at `layers * d_model` consecutive `f32` values
//! in the blob. The manifest checksum is the SHA-256 of the blob.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forge::{ActivationTable, Geometry, Mcv, Role};
use crate::linalg::Vector;

pub const BUNDLE_MAGIC: &[u8; 8] = b"SDLSBNDL";
pub const BUNDLE_DTYPE: &str = "float32";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub image_id: String,
    pub role: Role,
    /// Byte offset into the blob.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub backbone: String,
    pub layers: usize,
    pub d_model: usize,
    pub dtype: String,
    pub sample_count: usize,
    pub index: Vec<IndexEntry>,
    pub checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBundle {
    pub manifest: Manifest,
    blob: Vec<u8>,
}

fn bad(field: &'static str, message: impl Into<String>) -> Error {
    Error::Bundle {
        field,
        message: message.into(),
    }
}

impl ActivationBundle {
    /// Packs `mcvs` in order; every vector must match `geometry`.
    pub fn new(
        backbone: &str,
        geometry: Geometry,
        mcvs: &[Mcv],
        provenance: Option<serde_json::Value>,
    ) -> Result<Self> {
        let stride = geometry.dim() * 4;
        let mut blob = Vec::with_capacity(stride * mcvs.len());
        let mut index = Vec::with_capacity(mcvs.len());
        let mut seen = HashSet::new();
        for m in mcvs {
            if m.geometry != geometry {
                return Err(Error::Geometry(format!(
                    "{} ({}) has geometry {:?}, bundle expects {:?}",
                    m.image_id, m.role, m.geometry, geometry
                )));
            }
            if !seen.insert((m.image_id.clone(), m.role)) {
                return Err(bad("index", format!("duplicate entry {} ({})", m.image_id, m.role)));
            }
            index.push(IndexEntry {
                image_id: m.image_id.clone(),
                role: m.role,
                offset: blob.len() as u64,
            });
            blob.extend(m.z.iter().flat_map(|&x| (x as f32).to_le_bytes()));
        }
        let manifest = Manifest {
            backbone: backbone.to_string(),
            layers: geometry.segments,
            d_model: geometry.d_model,
            dtype: BUNDLE_DTYPE.into(),
            sample_count: index.len(),
            index,
            checksum: hex::encode(Sha256::digest(&blob)),
            provenance,
        };
        Ok(Self { manifest, blob })
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            segments: self.manifest.layers,
            d_model: self.manifest.d_model,
        }
    }

    pub fn len(&self) -> usize {
        self.manifest.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.index.is_empty()
    }

    pub fn checksum(&self) -> &str {
        &self.manifest.checksum
    }

    /// Entry `i`, upcast to `f64`.
    pub fn mcv(&self, i: usize) -> Mcv {
        let e = &self.manifest.index[i];
        let g = self.geometry();
        let start = e.offset as usize;
        let z = self.blob[start..start + g.dim() * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        Mcv {
            image_id: e.image_id.clone(),
            role: e.role,
            geometry: g,
            z: Vector(z),
        }
    }

    pub fn mcvs(&self) -> impl Iterator<Item = Mcv> + '_ {
        (0..self.len()).map(|i| self.mcv(i))
    }

    pub fn to_table(&self) -> Result<ActivationTable> {
        ActivationTable::from_mcvs(self.geometry(), self.mcvs())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.manifest)?;
        let len = u32::try_from(json.len()).map_err(|_| bad("manifest", "manifest exceeds 4 GiB"))?;
        let mut out = Vec::with_capacity(12 + json.len() + self.blob.len());
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&self.blob);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != BUNDLE_MAGIC {
            return Err(bad("magic", "expected SDLSBNDL"));
        }
        let len_bytes = bytes
            .get(8..12)
            .ok_or_else(|| bad("manifest_length", "file ends before the length prefix"))?;
        let hlen = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        let json = bytes
            .get(12..12 + hlen)
            .ok_or_else(|| bad("manifest_length", format!("declares {hlen} bytes, file is shorter")))?;
        let manifest: Manifest =
            serde_json::from_slice(json).map_err(|e| bad("manifest", e.to_string()))?;
        let blob = bytes[12 + hlen..].to_vec();
        validate(&manifest, &blob)?;
        Ok(Self { manifest, blob })
    }
}

fn validate(m: &Manifest, blob: &[u8]) -> Result<()> {
    if m.dtype != BUNDLE_DTYPE {
        return Err(bad("dtype", format!("expected {BUNDLE_DTYPE}, found {}", m.dtype)));
    }
    if m.layers == 0 {
        return Err(bad("layers", "must be at least 1"));
    }
    if m.d_model == 0 {
        return Err(bad("d_model", "must be at least 1"));
    }
    if m.sample_count != m.index.len() {
        return Err(bad(
            "sample_count",
            format!("{} declared, index has {}", m.sample_count, m.index.len()),
        ));
    }
    let stride = (m.layers * m.d_model * 4) as u64;
    let expected = stride * m.index.len() as u64;
    if (blob.len() as u64) < expected {
        return Err(bad(
            "blob",
            format!("truncated: {} bytes, index needs {expected}", blob.len()),
        ));
    }
    if blob.len() as u64 != expected {
        return Err(bad(
            "layers",
            format!(
                "blob of {} bytes is not {} samples of {} x {} float32",
                blob.len(),
                m.index.len(),
                m.layers,
                m.d_model
            ),
        ));
    }
    let mut seen = HashSet::new();
    for e in &m.index {
        if e.offset % 4 != 0 || e.offset + stride > blob.len() as u64 {
            return Err(bad(
                "offset",
                format!("{} ({}) at byte {} does not fit the blob", e.image_id, e.role, e.offset),
            ));
        }
        if !seen.insert((&e.image_id, e.role)) {
            return Err(bad("index", format!("duplicate entry {} ({})", e.image_id, e.role)));
        }
    }
    if hex::encode(Sha256::digest(blob)) != m.checksum {
        return Err(bad("checksum", "blob does not match the manifest checksum"));
    }
    Ok(())
}

/// Writes a bundle and returns its blob checksum.
pub fn write_bundle(bundle: &ActivationBundle, path: &Path) -> Result<String> {
    fs::write(path, bundle.to_bytes()?).map_err(|e| Error::io(path, e))?;
    Ok(bundle.manifest.checksum.clone())
}

pub fn read_bundle(path: &Path) -> Result<ActivationBundle> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ActivationBundle::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::build_mcv;

    fn sample() -> ActivationBundle {
        let g = Geometry {
            segments: 2,
            d_model: 3,
        };
        let mcvs = vec![
            build_mcv(&[vec![1.0, 2.0, 3.0], vec![0.5, -0.5, 0.25]], "a", Role::Hist).unwrap(),
            build_mcv(&[vec![0.0, 1.0, 0.0], vec![2.0, 2.0, 2.0]], "a", Role::Curr).unwrap(),
        ];
        ActivationBundle::new("toy", g, &mcvs, None).unwrap()
    }

    fn field(err: Error) -> &'static str {
        match err {
            Error::Bundle { field, .. } => field,
            other => panic!("expected a bundle error, got {other}"),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let b = sample();
        let bytes = b.to_bytes().unwrap();
        let back = ActivationBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.mcv(0).z.0, vec![1.0, 2.0, 3.0, 0.5, -0.5, 0.25]);
    }

    #[test]
    fn empty_bundle_is_valid() {
        let g = Geometry {
            segments: 3,
            d_model: 4,
        };
        let b = ActivationBundle::new("toy", g, &[], None).unwrap();
        let back = ActivationBundle::from_bytes(&b.to_bytes().unwrap()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.geometry(), g);
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let mut bytes = sample().to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 3] ^= 0x40;
        assert_eq!(field(ActivationBundle::from_bytes(&bytes).unwrap_err()), "checksum");
    }

    #[test]
    fn truncation_names_the_blob() {
        let bytes = sample().to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 4];
        assert_eq!(field(ActivationBundle::from_bytes(cut).unwrap_err()), "blob");
    }

    #[test]
    fn geometry_mismatch_names_the_layers() {
        let mut b = sample();
        b.manifest.layers = 1;
        let err = ActivationBundle::from_bytes(&b.to_bytes().unwrap()).unwrap_err();
        assert_eq!(field(err), "layers");
    }

    #[test]
    fn bad_magic_and_count() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        assert_eq!(field(ActivationBundle::from_bytes(&bytes).unwrap_err()), "magic");
        let mut b = sample();
        b.manifest.sample_count = 5;
        let err = ActivationBundle::from_bytes(&b.to_bytes().unwrap()).unwrap_err();
        assert_eq!(field(err), "sample_count");
    }
}
