// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steering-vector construction from paired activations.

mod controls;
mod file;
mod icv;
mod sdiv;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use controls::{control_vector, style_basis, ControlKind, STYLE_K};
pub use file::{load_vector, save_vector, VECTOR_FORMAT};
pub use icv::{global_icv, global_icv_sweep, specific50_icv, ICV_K_GRID};
pub use sdiv::{classed_diffs, sdiv, SdivOutcome};

use crate::corpus::PairedReport;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hist,
    Curr,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Hist => "hist",
            Role::Curr => "curr",
        })
    }
}

/// Layout of a multi-layer vector: `segments` blocks of `d_model` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub segments: usize,
    pub d_model: usize,
}

impl Geometry {
    pub fn dim(&self) -> usize {
        self.segments * self.d_model
    }

    pub fn segment<'a>(&self, v: &'a [f64], s: usize) -> &'a [f64] {
        &v[s * self.d_model..(s + 1) * self.d_model]
    }

    pub fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Geometry(format!(
                "vector of dim {} does not fit {} x {}",
                v.len(),
                self.segments,
                self.d_model
            )));
        }
        Ok(())
    }
}

/// Concatenated per-layer final-token states for one (image, report) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mcv {
    pub image_id: String,
    pub role: Role,
    pub geometry: Geometry,
    pub z: Vector,
}

/// Stacks `states` in layer order, embedding layer first.
pub fn build_mcv(states: &[Vec<f64>], image_id: &str, role: Role) -> Result<Mcv> {
    let d_model = states
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Geometry("no layer states".into()))?;
    if let Some((l, s)) = states.iter().enumerate().find(|(_, s)| s.len() != d_model) {
        return Err(Error::Geometry(format!(
            "layer {l} has dim {}, layer 0 has dim {d_model}",
            s.len()
        )));
    }
    let z = Vector(states.concat());
    if !z.is_finite() {
        return Err(Error::NonFinite("layer states"));
    }
    Ok(Mcv {
        image_id: image_id.to_string(),
        role,
        geometry: Geometry {
            segments: states.len(),
            d_model,
        },
        z,
    })
}

/// Multi-layer vectors keyed by `(image_id, role)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTable {
    pub geometry: Geometry,
    entries: HashMap<(String, Role), Vector>,
}

impl ActivationTable {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            entries: HashMap::new(),
        }
    }

    pub fn from_mcvs(geometry: Geometry, mcvs: impl IntoIterator<Item = Mcv>) -> Result<Self> {
        let mut t = Self::new(geometry);
        for m in mcvs {
            t.insert(m)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, m: Mcv) -> Result<()> {
        if m.geometry != self.geometry {
            return Err(Error::Geometry(format!(
                "{} has geometry {:?}, table expects {:?}",
                m.image_id, m.geometry, self.geometry
            )));
        }
        self.entries.insert((m.image_id, m.role), m.z);
        Ok(())
    }

    pub fn get(&self, image_id: &str, role: Role) -> Option<&Vector> {
        self.entries.get(&(image_id.to_string(), role))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Columns `z(hist) - z(curr)`, one per pair, in pair order.
pub fn diff_matrix<'a>(pairs: impl IntoIterator<Item = &'a PairedReport>, acts: &ActivationTable) -> Result<Matrix> {
    let mut cols = Vec::new();
    for p in pairs {
        let get = |role| {
            acts.get(&p.image_id, role).ok_or_else(|| {
                Error::Pairing(format!("no {role} activation for {}", p.image_id))
            })
        };
        let (h, c) = (get(Role::Hist)?, get(Role::Curr)?);
        cols.push(h.iter().zip(c.iter()).map(|(a, b)| a - b).collect::<Vec<f64>>());
    }
    if cols.is_empty() {
        return Err(Error::Pairing("no pairs".into()));
    }
    Matrix::from_columns(&cols)
}

/// Where a vector came from and how it was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorKind {
    GlobalIcv { k: usize },
    Specific50Icv { k: usize },
    Sdiv,
    RandomControl,
    ShuffledControl,
    OrthogonalControl,
    StyleOrtho,
}

impl VectorKind {
    pub fn is_control(&self) -> bool {
        matches!(
            self,
            Self::RandomControl | Self::ShuffledControl | Self::OrthogonalControl
        )
    }
}

impl fmt::Display for VectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GlobalIcv { k } => write!(f, "global_icv_k{k}"),
            Self::Specific50Icv { k } => write!(f, "specific50_icv_k{k}"),
            Self::Sdiv => write!(f, "sdiv"),
            Self::RandomControl => write!(f, "random_control"),
            Self::ShuffledControl => write!(f, "shuffled_control"),
            Self::OrthogonalControl => write!(f, "orthogonal_control"),
            Self::StyleOrtho => write!(f, "style_ortho"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_checksum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Configuration of the command that produced the vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    /// Free-form build notes such as the effective rank or dropped classes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringVector {
    pub kind: VectorKind,
    pub geometry: Geometry,
    pub v: Vector,
    pub provenance: Provenance,
}

impl SteeringVector {
    pub fn new(kind: VectorKind, geometry: Geometry, v: Vector) -> Result<Self> {
        geometry.check(&v)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("steering vector"));
        }
        Ok(Self {
            kind,
            geometry,
            v,
            provenance: Provenance::default(),
        })
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }
}
