// SPDX-License-Identifier: MIT OR Apache-2.0

//! Consensus direction across semantic classes.
//!
//! Each class contributes its first principal component, oriented toward
//! the class mean difference. The stacked directions are orthonormalized by
//! QR in lexicographic class order and the normalized mean of the resulting
//! columns is returned.

use std::collections::BTreeMap;

use super::{diff_matrix, ActivationTable, Geometry, SteeringVector, VectorKind};
use crate::corpus::{assign_semantic_class, Category, CueDictionary, PairedReport};
use crate::error::{Error, Result};
use crate::linalg::{dot, first_principal_component, l2_normalize, qr_orthonormal_basis, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct SdivOutcome {
    pub vector: SteeringVector,
    /// Classes that entered the final QR, in stacking order.
    pub used: Vec<Category>,
    pub dropped: Vec<(Category, String)>,
    /// Sign-aligned first principal component of each used class.
    pub class_directions: Vec<(Category, Vector)>,
}

/// Difference matrices grouped by semantic class; unlabeled pairs are classified by rule.
pub fn classed_diffs(
    pairs: &[PairedReport],
    acts: &ActivationTable,
    dict: &CueDictionary,
) -> Result<BTreeMap<Category, Matrix>> {
    let mut groups: BTreeMap<Category, Vec<&PairedReport>> = BTreeMap::new();
    for p in pairs {
        let c = match p.semantic_class {
            Some(c) => c,
            None => assign_semantic_class(p, dict)?,
        };
        groups.entry(c).or_default().push(p);
    }
    groups
        .into_iter()
        .map(|(c, ps)| Ok((c, diff_matrix(ps, acts)?)))
        .collect()
}

pub fn sdiv(classed: &BTreeMap<Category, Matrix>, geometry: Geometry) -> Result<SdivOutcome> {
    let mut order: Vec<Category> = classed.keys().copied().collect();
    order.sort_by_key(|c| c.as_str());
    let mut dropped = Vec::new();
    let mut dirs: Vec<(Category, Vector)> = Vec::new();
    for c in order {
        let d = &classed[&c];
        if d.rows() != geometry.dim() {
            return Err(Error::Geometry(format!(
                "class {c} rows {} do not match geometry dim {}",
                d.rows(),
                geometry.dim()
            )));
        }
        if d.cols() < 2 {
            dropped.push((c, format!("{} difference column(s)", d.cols())));
            continue;
        }
        let mut p = match first_principal_component(d) {
            Ok(p) => p,
            Err(Error::ZeroVariance(m)) => {
                dropped.push((c, m));
                continue;
            }
            Err(e) => return Err(e),
        };
        if dot(&p, &d.column_mean()) < 0.0 {
            for x in p.iter_mut() {
                *x = -*x;
            }
        }
        dirs.push((c, p));
    }
    loop {
        if dirs.len() < 2 {
            return Err(Error::InsufficientClasses(dirs.len()));
        }
        let cols: Vec<Vec<f64>> = dirs.iter().map(|(_, p)| p.0.clone()).collect();
        match qr_orthonormal_basis(&Matrix::from_columns(&cols)?) {
            Ok(qr) => {
                let q = &qr.q;
                let mean: Vec<f64> = (0..q.rows())
                    .map(|i| (0..q.cols()).map(|j| q[(i, j)]).sum::<f64>() / q.cols() as f64)
                    .collect();
                let mut vector = SteeringVector::new(VectorKind::Sdiv, geometry, l2_normalize(&mean)?)?;
                let used: Vec<Category> = dirs.iter().map(|(c, _)| *c).collect();
                vector.provenance.notes.push(format!(
                    "classes={}",
                    used.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",")
                ));
                for (c, why) in &dropped {
                    vector.provenance.notes.push(format!("dropped {c}: {why}"));
                }
                return Ok(SdivOutcome {
                    vector,
                    used,
                    dropped,
                    class_directions: dirs,
                });
            }
            Err(Error::RankDeficient { column }) => {
                let (c, _) = dirs.remove(column);
                dropped.push((c, "direction linearly dependent on earlier classes".into()));
            }
            Err(e) => return Err(e),
        }
    }
}
