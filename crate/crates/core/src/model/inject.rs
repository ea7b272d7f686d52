// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::linalg::norm;

/// Tolerance on `‖v‖ = 1` for steering directions.
pub const UNIT_TOL: f64 = 1e-6;
/// Below this the rotated direction is treated as cancelled.
pub const CANCELLATION_NORM: f64 = 1e-10;

/// Rotates `h` toward `v` by strength `lambda` while keeping `‖h‖` fixed:
/// `‖h‖ · normalize(h/‖h‖ + λv)`.
///
/// `lambda == 0` returns `h` unchanged, bit for bit.
pub fn norm_preserving_inject(h: &[f64], v: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if h.len() != v.len() {
        return Err(Error::Shape(format!(
            "state has dim {}, direction has dim {}",
            h.len(),
            v.len()
        )));
    }
    if !lambda.is_finite() {
        return Err(Error::NonFinite("lambda"));
    }
    if lambda == 0.0 {
        return Ok(h.to_vec());
    }
    let hn = norm(h);
    if hn <= 0.0 || !hn.is_finite() {
        return Err(Error::ZeroVector);
    }
    let vn = norm(v);
    if (vn - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidArgument(format!(
            "steering direction must be unit norm, got {vn}"
        )));
    }
    let mixed: Vec<f64> = h.iter().zip(v).map(|(a, b)| a / hn + lambda * b).collect();
    let mn = norm(&mixed);
    if mn < CANCELLATION_NORM {
        return Err(Error::Cancellation { norm: mn });
    }
    Ok(mixed.into_iter().map(|x| hn * x / mn).collect())
}
