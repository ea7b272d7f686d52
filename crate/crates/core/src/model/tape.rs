// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reverse-mode automatic differentiation over row-major matrices.
//!
//! Only the fused operations the toy transformer needs are provided. Each
//! keeps whatever forward intermediates its backward rule reads.

use super::nn::{gelu, gelu_grad, softmax_in_place, standardize};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Param(usize),
    Input,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    AddTiled {
        x: Var,
        p: Var,
        period: usize,
    },
    LayerNorm {
        x: Var,
        g: Var,
        b: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        batch: usize,
        heads: usize,
        probs: Vec<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        probs: Matrix,
        count: usize,
    },
}

struct Node {
    value: Option<Matrix>,
    op: Op,
}

pub struct Tape<'a> {
    params: &'a [Matrix],
    nodes: Vec<Node>,
}

fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot => *slot = Some(g),
    }
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a [Matrix]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Option<Matrix>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(i)) => &self.params[*i],
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn param(&mut self, idx: usize) -> Var {
        self.push(None, Op::Param(idx))
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(Some(m), Op::Input)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b)).expect("matmul shapes");
        self.push(Some(out), Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        for (x, y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *x += y;
        }
        self.push(Some(out), Op::Add(a, b))
    }

    /// Adds a `1 x cols` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let mut out = self.value(x).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..out.rows() {
            for (a, b) in out.row_mut(i).iter_mut().zip(&r) {
                *a += b;
            }
        }
        self.push(Some(out), Op::AddRow(x, row))
    }

    /// Adds row `i % period` of `p` to row `i` of `x`.
    pub fn add_tiled(&mut self, x: Var, p: Var, period: usize) -> Var {
        let mut out = self.value(x).clone();
        let pm = self.value(p);
        for i in 0..out.rows() {
            let pr = pm.row(i % period).to_vec();
            for (a, b) in out.row_mut(i).iter_mut().zip(&pr) {
                *a += b;
            }
        }
        self.push(Some(out), Op::AddTiled { x, p, period })
    }

    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let (h, inv) = standardize(xv.row(i));
            xhat.row_mut(i).copy_from_slice(&h);
            inv_std.push(inv);
        }
        let gv = self.value(g).data();
        let bv = self.value(b).data();
        let mut out = xhat.clone();
        for i in 0..rows {
            for ((o, gg), bb) in out.row_mut(i).iter_mut().zip(gv).zip(bv) {
                *o = *o * gg + bb;
            }
        }
        self.push(
            Some(out),
            Op::LayerNorm {
                x,
                g,
                b,
                xhat,
                inv_std,
            },
        )
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = gelu(*v);
        }
        self.push(Some(out), Op::Gelu(x))
    }

    /// Multi-head scaled dot-product attention over `batch` independent
    /// sequences stacked along rows. Causal masking applies when requested
    /// and requires equal query and key lengths.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, batch: usize, heads: usize, causal: bool) -> Var {
        let (qm, km, vm) = (self.value(q), self.value(k), self.value(v));
        let d = qm.cols();
        let tq = qm.rows() / batch;
        let tk = km.rows() / batch;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut probs = vec![0.0; batch * heads * tq * tk];
        let mut out = Matrix::zeros(qm.rows(), d);
        for b in 0..batch {
            for h in 0..heads {
                let lo = h * dh;
                for i in 0..tq {
                    let qi = &qm.row(b * tq + i)[lo..lo + dh];
                    let limit = if causal { i + 1 } else { tk };
                    let mut w: Vec<f64> = (0..limit)
                        .map(|j| {
                            let kj = &km.row(b * tk + j)[lo..lo + dh];
                            qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>() * scale
                        })
                        .collect();
                    softmax_in_place(&mut w);
                    let base = ((b * heads + h) * tq + i) * tk;
                    probs[base..base + limit].copy_from_slice(&w);
                    let orow = &mut out.row_mut(b * tq + i)[lo..lo + dh];
                    for (j, &p) in w.iter().enumerate() {
                        let vj = &vm.row(b * tk + j)[lo..lo + dh];
                        for (o, x) in orow.iter_mut().zip(vj) {
                            *o += p * x;
                        }
                    }
                }
            }
        }
        self.push(
            Some(out),
            Op::Attention {
                q,
                k,
                v,
                batch,
                heads,
                probs,
            },
        )
    }

    pub fn gather(&mut self, table: Var, ids: Vec<usize>) -> Var {
        let t = self.value(table);
        let mut out = Matrix::zeros(ids.len(), t.cols());
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(Some(out), Op::Gather { table, ids })
    }

    /// Mean token cross-entropy over rows whose target is present.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<Option<usize>>) -> Var {
        let lv = self.value(logits);
        let mut probs = lv.clone();
        let mut total = 0.0;
        let mut count = 0;
        for (i, t) in targets.iter().enumerate() {
            let row = probs.row_mut(i);
            softmax_in_place(row);
            if let Some(t) = t {
                total -= row[*t].max(f64::MIN_POSITIVE).ln();
                count += 1;
            }
        }
        let loss = if count > 0 { total / count as f64 } else { 0.0 };
        self.push(
            Some(Matrix::from_vec(1, 1, vec![loss]).expect("1x1")),
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                count,
            },
        )
    }

    /// Gradients of scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Vec<Matrix> {
        let mut param_grads: Vec<Matrix> = self
            .params
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]).expect("1x1"));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Param(i) => {
                    for (a, b) in param_grads[*i].data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                Op::Input => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b)).expect("shapes");
                    let gb = self.value(*a).t_matmul(&g).expect("shapes");
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(x, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (a, b) in gr.data_mut().iter_mut().zip(g.row(i)) {
                            *a += b;
                        }
                    }
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *x, g);
                }
                Op::AddTiled { x, p, period } => {
                    let pv = self.value(*p);
                    let mut gp = Matrix::zeros(pv.rows(), pv.cols());
                    for i in 0..g.rows() {
                        for (a, b) in gp.row_mut(i % period).iter_mut().zip(g.row(i)) {
                            *a += b;
                        }
                    }
                    acc(&mut grads, *p, gp);
                    acc(&mut grads, *x, g);
                }
                Op::LayerNorm {
                    x,
                    g: gain,
                    b,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gain).data();
                    let cols = g.cols();
                    let mut gg = Matrix::zeros(1, cols);
                    let mut gb = Matrix::zeros(1, cols);
                    let mut gx = Matrix::zeros(g.rows(), cols);
                    for i in 0..g.rows() {
                        let dy = g.row(i);
                        let xh = xhat.row(i);
                        let mut dxhat = vec![0.0; cols];
                        for j in 0..cols {
                            gg.data_mut()[j] += dy[j] * xh[j];
                            gb.data_mut()[j] += dy[j];
                            dxhat[j] = dy[j] * gv[j];
                        }
                        let n = cols as f64;
                        let m1 = dxhat.iter().sum::<f64>() / n;
                        let m2 = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n;
                        for (j, o) in gx.row_mut(i).iter_mut().enumerate() {
                            *o = inv_std[i] * (dxhat[j] - m1 - xh[j] * m2);
                        }
                    }
                    acc(&mut grads, *gain, gg);
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, gx);
                }
                Op::Gelu(x) => {
                    let mut gx = g;
                    for (o, xv) in gx.data_mut().iter_mut().zip(self.value(*x).data()) {
                        *o *= gelu_grad(*xv);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    batch,
                    heads,
                    probs,
                } => {
                    let (qm, km, vm) = (self.value(*q), self.value(*k), self.value(*v));
                    let d = qm.cols();
                    let tq = qm.rows() / batch;
                    let tk = km.rows() / batch;
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut gq = Matrix::zeros(qm.rows(), d);
                    let mut gk = Matrix::zeros(km.rows(), d);
                    let mut gv = Matrix::zeros(vm.rows(), d);
                    let mut dp = vec![0.0; tk];
                    for b in 0..*batch {
                        for h in 0..*heads {
                            let lo = h * dh;
                            for i in 0..tq {
                                let base = ((b * heads + h) * tq + i) * tk;
                                let p = &probs[base..base + tk];
                                let go = &g.row(b * tq + i)[lo..lo + dh];
                                let mut dot = 0.0;
                                for j in 0..tk {
                                    if p[j] == 0.0 {
                                        dp[j] = 0.0;
                                        continue;
                                    }
                                    let vj = &vm.row(b * tk + j)[lo..lo + dh];
                                    dp[j] = go.iter().zip(vj).map(|(x, y)| x * y).sum();
                                    dot += p[j] * dp[j];
                                    let gvr = &mut gv.row_mut(b * tk + j)[lo..lo + dh];
                                    for (o, x) in gvr.iter_mut().zip(go) {
                                        *o += p[j] * x;
                                    }
                                }
                                let qi = qm.row(b * tq + i)[lo..lo + dh].to_vec();
                                for j in 0..tk {
                                    if p[j] == 0.0 {
                                        continue;
                                    }
                                    let ds = p[j] * (dp[j] - dot) * scale;
                                    let kj = &km.row(b * tk + j)[lo..lo + dh];
                                    let gqr = &mut gq.row_mut(b * tq + i)[lo..lo + dh];
                                    for (o, x) in gqr.iter_mut().zip(kj) {
                                        *o += ds * x;
                                    }
                                    let gkr = &mut gk.row_mut(b * tk + j)[lo..lo + dh];
                                    for (o, x) in gkr.iter_mut().zip(&qi) {
                                        *o += ds * x;
                                    }
                                }
                            }
                        }
                    }
                    acc(&mut grads, *q, gq);
                    acc(&mut grads, *k, gk);
                    acc(&mut grads, *v, gv);
                }
                Op::Gather { table, ids } => {
                    let t = self.value(*table);
                    let mut gt = Matrix::zeros(t.rows(), t.cols());
                    for (r, &id) in ids.iter().enumerate() {
                        for (a, b) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *a += b;
                        }
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                    count,
                } => {
                    let upstream = g.data()[0];
                    let mut gl = Matrix::zeros(probs.rows(), probs.cols());
                    if *count > 0 {
                        let s = upstream / *count as f64;
                        for (i, t) in targets.iter().enumerate() {
                            if let Some(t) = t {
                                let row = gl.row_mut(i);
                                for (o, p) in row.iter_mut().zip(probs.row(i)) {
                                    *o = s * p;
                                }
                                row[*t] -= s;
                            }
                        }
                    }
                    acc(&mut grads, *logits, gl);
                }
            }
        }
        param_grads
    }
}
