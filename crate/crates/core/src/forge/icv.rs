// SPDX-License-Identifier: MIT OR Apache-2.0

//! Projection of the mean difference onto the leading principal subspace.

use super::{diff_matrix, ActivationTable, Geometry, SteeringVector, VectorKind};
use crate::corpus::{EditClass, PairedReport, MINIMAL_SUBSET_SIZE};
use crate::error::{Error, Result};
use crate::linalg::{pca_top_k, Matrix, Vector};

pub const ICV_K_GRID: [usize; 7] = [1, 2, 3, 5, 10, 30, 100];

/// `U_k U_kᵀ μ`, with `μ` the raw column mean of `d` and `U_k` the top
/// principal directions of the mean-centered columns. The magnitude is kept.
fn projected_mean(d: &Matrix, k: usize) -> Result<(Vec<f64>, usize)> {
    if d.cols() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 difference columns, got {}",
            d.cols()
        )));
    }
    let mu = d.column_mean();
    let cap = k.min(d.rows()).min(d.cols());
    if cap == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let pca = pca_top_k(&d.centered(&mu), cap)?;
    if pca.effective_k == 0 {
        return Err(Error::Degenerate(
            "centered differences have no variance; projection basis is empty".into(),
        ));
    }
    Ok((pca.project(&mu)?, pca.effective_k))
}

pub fn global_icv(d: &Matrix, k: usize, geometry: Geometry) -> Result<SteeringVector> {
    if d.rows() != geometry.dim() {
        return Err(Error::Geometry(format!(
            "difference rows {} do not match geometry dim {}",
            d.rows(),
            geometry.dim()
        )));
    }
    let (v, eff) = projected_mean(d, k)?;
    let mut sv = SteeringVector::new(VectorKind::GlobalIcv { k }, geometry, Vector(v))?;
    sv.provenance.notes.push(format!("effective_k={eff}"));
    sv.provenance.notes.push(format!("pairs={}", d.cols()));
    Ok(sv)
}

/// One vector per entry of `grid`.
pub fn global_icv_sweep(d: &Matrix, grid: &[usize], geometry: Geometry) -> Result<Vec<SteeringVector>> {
    grid.iter().map(|&k| global_icv(d, k, geometry)).collect()
}

/// Same construction restricted to the first 50 minimal-edit pairs.
pub fn specific50_icv(pairs: &[PairedReport], acts: &ActivationTable, k: usize) -> Result<SteeringVector> {
    let subset: Vec<&PairedReport> = pairs
        .iter()
        .filter(|p| p.edit_class == EditClass::Minimal)
        .take(MINIMAL_SUBSET_SIZE)
        .collect();
    if subset.len() < MINIMAL_SUBSET_SIZE {
        return Err(Error::Subset {
            need: MINIMAL_SUBSET_SIZE,
            found: subset.len(),
        });
    }
    let d = diff_matrix(subset, acts)?;
    let mut sv = global_icv(&d, k, acts.geometry)?;
    sv.kind = VectorKind::Specific50Icv { k };
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(dim: usize) -> Geometry {
        Geometry {
            segments: 1,
            d_model: dim,
        }
    }

    #[test]
    fn identical_columns_are_degenerate() {
        let d = Matrix::from_columns(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(global_icv(&d, 1, geom(2)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn full_rank_returns_the_mean() {
        let d = Matrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let v = global_icv(&d, 2, geom(2)).unwrap();
        let mu = d.column_mean();
        for (a, b) in v.v.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn raw_magnitude_is_kept() {
        let d = Matrix::from_columns(&[vec![10.0, 0.0], vec![12.0, 0.1], vec![14.0, -0.1]]).unwrap();
        let v = global_icv(&d, 1, geom(2)).unwrap();
        assert!(v.norm() > 10.0);
    }
}
