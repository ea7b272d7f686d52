// SPDX-License-Identifier: MIT OR Apache-2.0

//! Percentile bootstrap, least squares with t-statistics, rank correlation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr_orthonormal_basis, Matrix};

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const BOOTSTRAP_METHOD: &str = "percentile";

/// Mean computed as an offset from the first element, so that a constant
/// sample returns that constant exactly.
fn anchored_mean(x: &[f64], idx: impl Iterator<Item = usize>) -> f64 {
    let x0 = x[0];
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in idx {
        sum += x[i] - x0;
        n += 1;
    }
    x0 + sum / n as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check(n: usize, resamples: usize, alpha: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one case".into()));
    }
    if resamples == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Percentile interval of an arbitrary statistic over case resamples.
///
/// Resample `b` draws from its own seeded stream, so results do not depend
/// on thread scheduling.
pub fn bootstrap_statistic_ci<F>(n: usize, resamples: usize, alpha: f64, seed: u64, stat: F) -> Result<(f64, f64)>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    check(n, resamples, alpha)?;
    let mut stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok((quantile(&stats, alpha / 2.0), quantile(&stats, 1.0 - alpha / 2.0)))
}

/// Percentile interval for the mean of paired per-case differences.
pub fn paired_bootstrap_ci(deltas: &[f64], resamples: usize, alpha: f64, seed: u64) -> Result<(f64, f64)> {
    check(deltas.len(), resamples, alpha)?;
    bootstrap_statistic_ci(deltas.len(), resamples, alpha, seed, |idx| {
        anchored_mean(deltas, idx.iter().copied())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first, then one entry per predictor.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares with intercept, solved through a QR factorization.
pub fn ols(y: &[f64], predictors: &[(String, Vec<f64>)]) -> Result<OlsFit> {
    let n = y.len();
    let p = predictors.len() + 1;
    if predictors.iter().any(|(_, x)| x.len() != n) {
        return Err(Error::Shape("predictor length differs from response".into()));
    }
    if n <= p {
        return Err(Error::SingularDesign(format!("{n} rows for {p} coefficients")));
    }
    let mut columns = vec![vec![1.0; n]];
    columns.extend(predictors.iter().map(|(_, x)| x.clone()));
    let x = Matrix::from_columns(&columns)?;
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data"));
    }
    let qr = qr_orthonormal_basis(&x).map_err(|e| match e {
        Error::RankDeficient { column } => {
            let name = if column == 0 {
                "intercept".to_string()
            } else {
                predictors[column - 1].0.clone()
            };
            Error::SingularDesign(format!("column {name} is linearly dependent"))
        }
        other => other,
    })?;
    let qty = qr.q.tmatvec(y)?;
    let r = &qr.r;
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r[(i, j)] * beta[j]).sum();
        beta[i] = (qty[i] - s) / r[(i, i)];
    }
    let fitted = x.matvec(&beta)?;
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let sigma2 = rss / (n - p) as f64;
    // Diagonal of (RᵀR)⁻¹ from the rows of R⁻¹.
    let mut rinv = Matrix::zeros(p, p);
    for j in 0..p {
        rinv[(j, j)] = 1.0 / r[(j, j)];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r[(i, k)] * rinv[(k, j)]).sum();
            rinv[(i, j)] = -s / r[(i, i)];
        }
    }
    let std_errors: Vec<f64> = (0..p)
        .map(|i| (sigma2 * (0..p).map(|j| rinv[(i, j)].powi(2)).sum::<f64>()).sqrt())
        .collect();
    let t_stats = beta.iter().zip(&std_errors).map(|(b, s)| b / s).collect();
    let mut names = vec!["intercept".to_string()];
    names.extend(predictors.iter().map(|(n, _)| n.clone()));
    Ok(OlsFit {
        names,
        coefficients: beta,
        std_errors,
        t_stats,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
        n,
    })
}

/// One regression row of the decoupling analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingRow {
    pub history_free_prob: f64,
    pub similarity: f64,
    pub hsr: f64,
    pub length: f64,
}

/// Regresses the history-free probability on similarity, span rate and length.
pub fn ols_decoupling(rows: &[DecouplingRow]) -> Result<OlsFit> {
    let y: Vec<f64> = rows.iter().map(|r| r.history_free_prob).collect();
    ols(
        &y,
        &[
            ("similarity".into(), rows.iter().map(|r| r.similarity).collect()),
            ("hsr".into(), rows.iter().map(|r| r.hsr).collect()),
            ("length".into(), rows.iter().map(|r| r.length).collect()),
        ],
    )
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs two equal series of length >= 2".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("spearman input is constant".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
