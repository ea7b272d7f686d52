// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic dense linear algebra in `f64`.
//!
//! Everything here is pure and sequential so that identical inputs give
//! bit-identical outputs on every platform. The routines are sized for
//! steering work (a few thousand dimensions at most), not for general use.
//!
//! - [`pca_top_k`]: principal directions via one-sided Jacobi SVD
//! - [`first_principal_component`]: centered top-1 PCA
//! - [`qr_orthonormal_basis`]: thin Householder QR with a non-negative `R` diagonal
//! - [`l2_normalize`], [`project_out_subspace`]

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a diagonal entry of `R` marks a dependent column.
pub const RANK_TOL: f64 = 1e-12;
/// Relative threshold on singular values used to decide numerical rank in PCA.
pub const SVD_RANK_TOL: f64 = 1e-10;
/// Norm below which a vector is treated as zero.
pub const ZERO_NORM: f64 = 1e-12;
/// Maximum entry of `|U^T U - I|` tolerated by [`project_out_subspace`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;

const MAX_JACOBI_SWEEPS: usize = 80;

// ---------------------------------------------------------------------------
// Vector
// ---------------------------------------------------------------------------

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|x| x * s).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero if either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols: ncols,
            data: rows.concat(),
        })
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let nrows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::Shape("columns of unequal length".into()));
        }
        let mut m = Self::zeros(nrows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let arow = &self.data[r * self.cols..(r + 1) * self.cols];
            let brow = &other.data[r * other.cols..(r + 1) * other.cols];
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let brow = &other.data[j * other.cols..(j + 1) * other.cols];
                out.data[i * other.rows + j] = arow.iter().zip(brow).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by vector of dim {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `self^T v`.
    pub fn tmatvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})^T by vector of dim {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Mean over columns (one entry per row).
    pub fn column_mean(&self) -> Vec<f64> {
        let n = self.cols.max(1) as f64;
        (0..self.rows)
            .map(|i| self.row(i).iter().sum::<f64>() / n)
            .collect()
    }

    /// Subtracts `center` from every column.
    pub fn centered(&self, center: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            let c = center[i];
            for x in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *x -= c;
            }
        }
        out
    }

    /// Maximum absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// SVD (one-sided Jacobi)
// ---------------------------------------------------------------------------

/// Left singular vectors and singular values, descending.
#[derive(Debug, Clone)]
pub struct LeftSvd {
    /// Column `i` is the `i`-th left singular vector (length = rows of the input).
    pub vectors: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

/// Hestenes one-sided Jacobi on a set of columns.
///
/// Rotates `cols` pairwise until mutually orthogonal. When `acc` is given the
/// same rotations are applied to its columns.
fn jacobi_orthogonalize(cols: &mut [Vec<f64>], mut acc: Option<&mut [Vec<f64>]>) {
    let n = cols.len();
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(cols, i, j, c, s);
                if let Some(a) = acc.as_deref_mut() {
                    rotate_pair(a, i, j, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Thin SVD returning left singular vectors with nonzero singular values first.
///
/// Works on the shorter side of `a`: columns when `cols <= rows`, otherwise rows
/// with the rotations accumulated into the left factor.
pub fn left_svd(a: &Matrix) -> Result<LeftSvd> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let (m, n) = (a.rows(), a.cols());
    let (mut pairs, vectors_from_cols): (Vec<(f64, Vec<f64>)>, bool) = if n <= m {
        let mut cols = a.columns();
        jacobi_orthogonalize(&mut cols, None);
        (cols.into_iter().map(|c| (norm(&c), c)).collect(), true)
    } else {
        let mut rows: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).to_vec()).collect();
        let mut w: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                e
            })
            .collect();
        jacobi_orthogonalize(&mut rows, Some(&mut w));
        (
            rows.iter().map(|r| norm(r)).zip(w).collect(),
            false,
        )
    };
    // stable sort keeps index order among equal singular values
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut vectors = Vec::with_capacity(pairs.len());
    let mut singular_values = Vec::with_capacity(pairs.len());
    for (sigma, v) in pairs {
        let u = if vectors_from_cols {
            if sigma > 0.0 {
                v.iter().map(|x| x / sigma).collect()
            } else {
                vec![0.0; m]
            }
        } else {
            v
        };
        vectors.push(u);
        singular_values.push(sigma);
    }
    Ok(LeftSvd {
        vectors,
        singular_values,
    })
}

/// Flips `v` so that its first largest-magnitude entry is non-negative.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

/// Top principal directions of a (pre-centered) sample matrix.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    /// `rows x effective_k`, orthonormal columns ordered by descending singular value.
    pub basis: Matrix,
    pub singular_values: Vec<f64>,
    pub requested_k: usize,
    pub effective_k: usize,
}

impl PcaBasis {
    pub fn components(&self) -> Vec<Vec<f64>> {
        self.basis.columns()
    }

    /// Orthogonal projection of `v` onto the span of the basis.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.basis.tmatvec(v)?;
        self.basis.matvec(&coeffs)
    }
}

/// Top-`k` principal directions of `centered`, whose columns are samples.
///
/// If `k` exceeds the numerical rank the basis is truncated and
/// [`PcaBasis::effective_k`] reports how many directions survived.
pub fn pca_top_k(centered: &Matrix, k: usize) -> Result<PcaBasis> {
    let max_k = centered.rows().min(centered.cols());
    if k == 0 || k > max_k {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={max_k}"
        )));
    }
    if !centered.is_finite() {
        return Err(Error::NonFinite("pca input"));
    }
    let svd = left_svd(centered)?;
    let sigma_max = svd.singular_values.first().copied().unwrap_or(0.0);
    let rank = if sigma_max <= f64::MIN_POSITIVE {
        0
    } else {
        svd.singular_values
            .iter()
            .take_while(|&&s| s > SVD_RANK_TOL * sigma_max)
            .count()
    };
    let effective_k = k.min(rank);
    let mut columns: Vec<Vec<f64>> = svd.vectors.into_iter().take(effective_k).collect();
    for c in &mut columns {
        fix_sign(c);
    }
    let basis = if columns.is_empty() {
        Matrix::zeros(centered.rows(), 0)
    } else {
        Matrix::from_columns(&columns)?
    };
    Ok(PcaBasis {
        basis,
        singular_values: svd.singular_values.into_iter().take(effective_k).collect(),
        requested_k: k,
        effective_k,
    })
}

/// First principal component of the sample columns of `samples` (centered internally).
pub fn first_principal_component(samples: &Matrix) -> Result<Vector> {
    if samples.cols() == 0 {
        return Err(Error::InvalidArgument("no sample columns".into()));
    }
    let centered = samples.centered(&samples.column_mean());
    if samples.rows() == 0 {
        return Err(Error::ZeroVariance("zero-dimensional samples".into()));
    }
    let pca = pca_top_k(&centered, 1)?;
    if pca.effective_k == 0 {
        return Err(Error::ZeroVariance(
            "centered samples have no variance".into(),
        ));
    }
    Ok(Vector(pca.basis.column(0)))
}

// ---------------------------------------------------------------------------
// QR
// ---------------------------------------------------------------------------

/// Thin Householder QR, `v = q r`, with `diag(r) >= 0`.
#[derive(Debug, Clone)]
pub struct Qr {
    pub q: Matrix,
    pub r: Matrix,
}

/// Thin QR of a `D x C` matrix (`C <= D`).
///
/// Returns [`Error::RankDeficient`] naming the first column whose `|R_ii|`
/// falls below `1e-12 * |V|_F`.
pub fn qr_orthonormal_basis(v: &Matrix) -> Result<Qr> {
    let (d, c) = (v.rows(), v.cols());
    if c > d {
        return Err(Error::Shape(format!(
            "QR needs columns <= rows, got {d}x{c}"
        )));
    }
    if !v.is_finite() {
        return Err(Error::NonFinite("qr input"));
    }
    let scale = v.frobenius_norm();
    let mut a = v.clone();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(c);
    for j in 0..c {
        let x: Vec<f64> = (j..d).map(|i| a[(i, j)]).collect();
        let xnorm = norm(&x);
        if xnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut u = x;
        u[0] -= alpha;
        let unorm = norm(&u);
        if unorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        for e in &mut u {
            *e /= unorm;
        }
        // A[j.., j..] -= 2 u (u^T A[j.., j..])
        for col in j..c {
            let proj: f64 = (j..d).map(|i| u[i - j] * a[(i, col)]).sum();
            for i in j..d {
                a[(i, col)] -= 2.0 * u[i - j] * proj;
            }
        }
        reflectors.push(Some(u));
    }

    let mut r = Matrix::zeros(c, c);
    for i in 0..c {
        for j in i..c {
            r[(i, j)] = a[(i, j)];
        }
    }
    // Q = H_0 H_1 ... H_{c-1} applied to the first c columns of I
    let mut q = Matrix::zeros(d, c);
    for j in 0..c {
        q[(j, j)] = 1.0;
    }
    for (j, refl) in reflectors.iter().enumerate().rev() {
        let Some(u) = refl else { continue };
        for col in 0..c {
            let proj: f64 = (j..d).map(|i| u[i - j] * q[(i, col)]).sum();
            for i in j..d {
                q[(i, col)] -= 2.0 * u[i - j] * proj;
            }
        }
    }
    for i in 0..c {
        if r[(i, i)] < 0.0 {
            for j in 0..c {
                r[(i, j)] = -r[(i, j)];
            }
            for row in 0..d {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    for i in 0..c {
        if r[(i, i)].abs() < RANK_TOL * scale || scale == 0.0 {
            return Err(Error::RankDeficient { column: i });
        }
    }
    Ok(Qr { q, r })
}

// ---------------------------------------------------------------------------
// Normalization and projection
// ---------------------------------------------------------------------------

pub fn l2_normalize(v: &[f64]) -> Result<Vector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("normalize input"));
    }
    let n = norm(v);
    if n < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(Vector(v.iter().map(|x| x / n).collect()))
}

/// Largest entry of `|U^T U - I|`.
pub fn orthonormality_defect(u: &Matrix) -> f64 {
    let cols = u.columns();
    let mut worst = 0.0f64;
    for i in 0..cols.len() {
        for j in i..cols.len() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
        }
    }
    worst
}

/// `v - U (U^T v)` for a basis `U` with orthonormal columns.
pub fn project_out_subspace(v: &[f64], u: &Matrix) -> Result<Vector> {
    if u.rows() != v.len() {
        return Err(Error::Shape(format!(
            "basis has {} rows, vector has dim {}",
            u.rows(),
            v.len()
        )));
    }
    let deviation = orthonormality_defect(u);
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    let coeffs = u.tmatvec(v)?;
    let proj = u.matvec(&coeffs)?;
    Ok(Vector(v.iter().zip(&proj).map(|(a, b)| a - b).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn pca_axis_aligned() {
        let d = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let pca = pca_top_k(&d, 1).unwrap();
        assert_eq!(pca.effective_k, 1);
        assert!(approx(&pca.basis.column(0), &[1.0, 0.0], 1e-15));
    }

    #[test]
    fn pca_duplicate_columns_match_single() {
        let one = Matrix::from_columns(&[vec![1.0, 2.0, -1.0]]).unwrap();
        let two = Matrix::from_columns(&[vec![1.0, 2.0, -1.0], vec![1.0, 2.0, -1.0]]).unwrap();
        let a = pca_top_k(&one, 1).unwrap();
        let b = pca_top_k(&two, 1).unwrap();
        assert!(approx(&a.basis.column(0), &b.basis.column(0), 1e-12));
    }

    #[test]
    fn pca_truncates_to_rank() {
        let d = Matrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap();
        let pca = pca_top_k(&d, 2).unwrap();
        assert_eq!(pca.effective_k, 1);
        assert_eq!(pca.requested_k, 2);
    }

    #[test]
    fn pca_rejects_bad_k_and_nan() {
        let d = Matrix::identity(2);
        assert!(pca_top_k(&d, 0).is_err());
        assert!(pca_top_k(&d, 3).is_err());
        let bad = Matrix::from_rows(&[vec![f64::NAN, 0.0]]).unwrap();
        assert!(matches!(pca_top_k(&bad, 1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn first_pc_collinear() {
        let d = Matrix::from_columns(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let pc = first_principal_component(&d).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(approx(&pc, &[h, h], 1e-12));
    }

    #[test]
    fn first_pc_single_column_has_no_variance() {
        let d = Matrix::from_columns(&[vec![3.0, 4.0]]).unwrap();
        assert!(matches!(
            first_principal_component(&d),
            Err(Error::ZeroVariance(_))
        ));
        let z = Matrix::zeros(3, 4);
        assert!(matches!(
            first_principal_component(&z),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn qr_identity() {
        let qr = qr_orthonormal_basis(&Matrix::identity(3)).unwrap();
        assert!(qr.q.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        assert!(qr.r.max_abs_diff(&Matrix::identity(3)) < 1e-15);
    }

    #[test]
    fn qr_orthonormal_input_is_fixed_point() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = Matrix::from_columns(&[vec![h, h, 0.0], vec![-h, h, 0.0]]).unwrap();
        let qr = qr_orthonormal_basis(&v).unwrap();
        assert!(qr.q.max_abs_diff(&v) < 1e-12);
        assert!(qr.r.max_abs_diff(&Matrix::identity(2)) < 1e-12);
    }

    #[test]
    fn qr_flags_dependent_column() {
        let v = Matrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        assert!(matches!(
            qr_orthonormal_basis(&v),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn normalize_cases() {
        assert!(approx(&l2_normalize(&[3.0, 4.0]).unwrap(), &[0.6, 0.8], 1e-15));
        assert_eq!(l2_normalize(&[1.0, 0.0]).unwrap().0, vec![1.0, 0.0]);
        assert!(matches!(l2_normalize(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn project_out_cases() {
        let e1 = Matrix::from_columns(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let r = project_out_subspace(&[1.0, 1.0, 0.0], &e1).unwrap();
        assert_eq!(r.0, vec![0.0, 1.0, 0.0]);
        let r = project_out_subspace(&[2.0, 0.0, 0.0], &e1).unwrap();
        assert_eq!(r.0, vec![0.0, 0.0, 0.0]);
        let r = project_out_subspace(&[0.0, 5.0, -1.0], &e1).unwrap();
        assert_eq!(r.0, vec![0.0, 5.0, -1.0]);
        let not_ortho = Matrix::from_columns(&[vec![2.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            project_out_subspace(&[1.0, 0.0, 0.0], &not_ortho),
            Err(Error::NotOrthonormal { .. })
        ));
    }
}
