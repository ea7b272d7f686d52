// SPDX-License-Identifier: MIT OR Apache-2.0

//! Row-level primitives shared by the inference path and the training tape.

use crate::linalg::Matrix;

pub const LN_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.797_884_560_802_865_4;
const GELU_K: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_K * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Returns `(x - mean) / sqrt(var + eps)` and the inverse standard deviation.
pub fn standardize(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    (x.iter().map(|v| (v - mean) * inv).collect(), inv)
}

pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let (xhat, _) = standardize(x);
    xhat.iter()
        .zip(gain)
        .zip(bias)
        .map(|((v, g), b)| v * g + b)
        .collect()
}

pub fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// `x · W (+ b)` for a single row.
pub fn linear(x: &[f64], w: &Matrix, bias: Option<&Matrix>) -> Vec<f64> {
    let mut out = match bias {
        Some(b) => b.data().to_vec(),
        None => vec![0.0; w.cols()],
    };
    let cols = w.cols();
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let row = &w.data()[k * cols..(k + 1) * cols];
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += xk * wv;
        }
    }
    out
}

pub fn add_assign(x: &mut [f64], y: &[f64]) {
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
}
