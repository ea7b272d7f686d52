// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerical routines.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sdls::corpus::Category;
use sdls::linalg::Matrix;
use sdls::metrics::OperatingPointRow;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| gaussian(rng, cols)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn unit(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns eigenvalues descending with eigenvectors as columns of `vecs[i]`.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|r| v[r][i]).collect()).collect();
    (vals, vecs)
}

/// Dominant eigenvector of a symmetric positive semidefinite matrix.
pub fn power_iteration(a: &[Vec<f64>], iters: usize) -> Vec<f64> {
    let n = a.len();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    for _ in 0..iters {
        let y: Vec<f64> = a.iter().map(|row| dot(row, &x)).collect();
        x = unit(&y);
    }
    x
}

/// `D Dᵀ` for a matrix stored as rows.
pub fn gram_rows(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    d.iter().map(|a| d.iter().map(|b| dot(a, b)).collect()).collect()
}

/// Rows with their row-wise mean across columns removed.
pub fn center_columns(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    d.iter()
        .map(|row| {
            let m = row.iter().sum::<f64>() / row.len() as f64;
            row.iter().map(|x| x - m).collect()
        })
        .collect()
}

/// `U Uᵀ` for orthonormal columns given as a list.
pub fn projector(cols: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| cols.iter().map(|u| u[i] * u[j]).sum()).collect())
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &y)| {
        let mut r = r.clone();
        r.push(y);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Least squares with intercept via `(XᵀX) β = Xᵀy`.
pub fn normal_equations(y: &[f64], predictors: &[Vec<f64>]) -> Vec<f64> {
    let n = y.len();
    let mut cols = vec![vec![1.0; n]];
    cols.extend(predictors.iter().cloned());
    let xtx: Vec<Vec<f64>> = cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect();
    let xty: Vec<f64> = cols.iter().map(|a| dot(a, y)).collect();
    gauss_solve(&xtx, &xty)
}

/// Exhaustive selection: keep rows that improve suppression without losing
/// fidelity, then return the one no other kept row beats.
pub fn select_exhaustive(rows: &[OperatingPointRow], baseline_f1: f64) -> Option<String> {
    let kept: Vec<&OperatingPointRow> = rows
        .iter()
        .filter(|r| r.macro_f1 >= baseline_f1 && r.delta_hsr > 0.0)
        .collect();
    let beats = |a: &OperatingPointRow, b: &OperatingPointRow| -> bool {
        if a.delta_hsr != b.delta_hsr {
            return a.delta_hsr > b.delta_hsr;
        }
        if a.macro_f1 != b.macro_f1 {
            return a.macro_f1 > b.macro_f1;
        }
        if a.lambda.abs() != b.lambda.abs() {
            return a.lambda.abs() < b.lambda.abs();
        }
        a.condition < b.condition
    };
    kept.iter()
        .find(|a| kept.iter().all(|b| std::ptr::eq(**a, *b) || beats(a, b)))
        .map(|r| r.condition.clone())
}

/// Four classes sharing a unit style direction `s`.
///
/// Class `c` has content `e_c` orthogonal to `s` and to every other class,
/// with `‖e_c‖ ≤ ‖s‖`. Each difference column is a scaled copy of
/// `s + e_c` plus small isotropic noise.
pub struct PlantedStyle {
    pub style: Vec<f64>,
    pub classed: BTreeMap<Category, Matrix>,
}

pub fn planted_style(seed: u64, dim: usize, per_class: usize, noise: f64) -> PlantedStyle {
    let mut r = rng(seed);
    // Gram-Schmidt on random vectors gives s and the four contents.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < 5 {
        let mut v = gaussian(&mut r, dim);
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        basis.push(unit(&v));
    }
    let style = basis[0].clone();
    let mut classed = BTreeMap::new();
    for (i, cat) in Category::ALL.into_iter().enumerate() {
        let scale: f64 = r.random_range(0.2..=1.0);
        let dir: Vec<f64> = style.iter().zip(&basis[i + 1]).map(|(s, e)| s + scale * e).collect();
        let cols: Vec<Vec<f64>> = (0..per_class)
            .map(|_| {
                let a: f64 = r.random_range(0.5..1.5);
                let eps = gaussian(&mut r, dim);
                dir.iter().zip(&eps).map(|(d, e)| a * d + noise * e).collect()
            })
            .collect();
        classed.insert(cat, Matrix::from_columns(&cols).unwrap());
    }
    PlantedStyle { style, classed }
}
