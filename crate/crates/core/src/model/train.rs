// SPDX-License-Identifier: MIT OR Apache-2.0

//! Teacher-forced cross-entropy training with Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::{AttnIdx, FfnIdx, Layout, NormIdx};
use super::tape::{Tape, Var};
use super::{ToyModel, ToyModelConfig};
use crate::corpus::PairedReport;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Probability that a pair's training target is its history report.
    pub history_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 8,
            lr: 3e-3,
            batch_size: 32,
            history_fraction: 0.76,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.history_fraction) {
            return Err(Error::InvalidArgument(format!(
                "history_fraction {} outside [0, 1]",
                self.history_fraction
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub steps: usize,
    pub epoch_losses: Vec<f64>,
    pub final_loss: Option<f64>,
}

/// Pre-encoded training sample.
pub(crate) struct Sample {
    image: Matrix,
    hist: Vec<usize>,
    curr: Vec<usize>,
}

pub(crate) struct Batch {
    images: Matrix,
    inputs: Vec<usize>,
    targets: Vec<Option<usize>>,
    size: usize,
    len: usize,
}

impl Batch {
    pub(crate) fn new(model: &ToyModel, items: &[(&Matrix, &[usize])]) -> Self {
        let cfg = model.config();
        let len = items.iter().map(|(_, t)| t.len() + 1).max().unwrap_or(1);
        let mut images = Matrix::zeros(items.len() * cfg.image_tokens, cfg.d_model);
        let mut inputs = Vec::with_capacity(items.len() * len);
        let mut targets = Vec::with_capacity(items.len() * len);
        for (b, (img, toks)) in items.iter().enumerate() {
            for i in 0..cfg.image_tokens {
                images.row_mut(b * cfg.image_tokens + i).copy_from_slice(img.row(i));
            }
            inputs.push(model.vocab().bos());
            inputs.extend_from_slice(toks);
            targets.extend(toks.iter().map(|&t| Some(t)));
            targets.push(Some(model.vocab().eos()));
            for _ in toks.len() + 1..len {
                inputs.push(0);
                targets.push(None);
            }
        }
        Self {
            images,
            inputs,
            targets,
            size: items.len(),
            len,
        }
    }
}

struct Net<'t, 'p> {
    tape: &'t mut Tape<'p>,
    cfg: &'t ToyModelConfig,
}

impl Net<'_, '_> {
    fn norm(&mut self, x: Var, n: NormIdx) -> Var {
        let g = self.tape.param(n.gain);
        let b = self.tape.param(n.bias);
        self.tape.layer_norm(x, g, b)
    }

    fn linear(&mut self, x: Var, w: usize) -> Var {
        let w = self.tape.param(w);
        self.tape.matmul(x, w)
    }

    fn ffn(&mut self, x: Var, f: FfnIdx) -> Var {
        let h = self.linear(x, f.w1);
        let b1 = self.tape.param(f.b1);
        let h = self.tape.add_row(h, b1);
        let h = self.tape.gelu(h);
        let o = self.linear(h, f.w2);
        let b2 = self.tape.param(f.b2);
        self.tape.add_row(o, b2)
    }

    fn attention(&mut self, xq: Var, xkv: Var, a: AttnIdx, batch: usize, causal: bool) -> Var {
        let q = self.linear(xq, a.wq);
        let k = self.linear(xkv, a.wk);
        let v = self.linear(xkv, a.wv);
        let ctx = self.tape.attention(q, k, v, batch, self.cfg.n_heads, causal);
        self.linear(ctx, a.wo)
    }
}

/// Builds the batched forward graph and returns `(logits, loss)`.
pub(crate) fn forward_graph(tape: &mut Tape<'_>, cfg: &ToyModelConfig, lay: &Layout, batch: &Batch) -> (Var, Var) {
    let mut net = Net { tape, cfg };
    let img = net.tape.input(batch.images.clone());
    let mut x = net.linear(img, lay.enc_in_w);
    let b = net.tape.param(lay.enc_in_b);
    x = net.tape.add_row(x, b);
    let pos = net.tape.param(lay.enc_pos);
    x = net.tape.add_tiled(x, pos, cfg.image_tokens);
    for layer in &lay.enc_layers {
        let n = net.norm(x, layer.ln1);
        let a = net.attention(n, n, layer.attn, batch.size, false);
        x = net.tape.add(x, a);
        let n = net.norm(x, layer.ln2);
        let f = net.ffn(n, layer.ffn);
        x = net.tape.add(x, f);
    }
    let memory = net.norm(x, lay.enc_lnf);

    let emb = net.tape.param(lay.tok_emb);
    let mut y = net.tape.gather(emb, batch.inputs.clone());
    let dpos = net.tape.param(lay.dec_pos);
    y = net.tape.add_tiled(y, dpos, batch.len);
    for layer in &lay.dec_layers {
        let n = net.norm(y, layer.ln1);
        let a = net.attention(n, n, layer.self_attn, batch.size, true);
        y = net.tape.add(y, a);
        let n = net.norm(y, layer.ln2);
        let c = net.attention(n, memory, layer.cross_attn, batch.size, false);
        y = net.tape.add(y, c);
        let n = net.norm(y, layer.ln3);
        let f = net.ffn(n, layer.ffn);
        y = net.tape.add(y, f);
    }
    let n = net.norm(y, lay.dec_lnf);
    let logits = net.linear(n, lay.head_w);
    let hb = net.tape.param(lay.head_b);
    let logits = net.tape.add_row(logits, hb);
    let loss = net.tape.cross_entropy(logits, batch.targets.clone());
    (logits, loss)
}

fn prepare(model: &ToyModel, pairs: &[PairedReport]) -> Result<Vec<Sample>> {
    let max_len = model.config().max_len;
    pairs
        .iter()
        .map(|p| {
            let hist = model.vocab().encode(&p.r_hist)?;
            let curr = model.vocab().encode(&p.r_curr)?;
            let longest = hist.len().max(curr.len());
            if longest + 1 > max_len {
                return Err(Error::InvalidArgument(format!(
                    "{}: report of {longest} tokens exceeds max_len {max_len}",
                    p.image_id
                )));
            }
            Ok(Sample {
                image: model.image(&p.image_id, &p.r_curr).features,
                hist,
                curr,
            })
        })
        .collect()
}

struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

impl Adam {
    fn new(params: &[Matrix]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [Matrix], grads: &[Matrix], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
                *pi -= cfg.lr * (*mi / c1) / ((*vi / c2).sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// Trains in place. Zero epochs leave the parameters untouched.
pub fn train(model: &mut ToyModel, pairs: &[PairedReport], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let samples = prepare(model, pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.params());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let items: Vec<(&Matrix, &[usize])> = chunk
                .iter()
                .map(|&i| {
                    let s = &samples[i];
                    let t = if rng.random::<f64>() < cfg.history_fraction {
                        &s.hist
                    } else {
                        &s.curr
                    };
                    (&s.image, t.as_slice())
                })
                .collect();
            let batch = Batch::new(model, &items);
            let grads = {
                let mut tape = Tape::new(model.params());
                let (_, loss) = forward_graph(&mut tape, model.config(), model.layout(), &batch);
                let l = tape.value(loss).data()[0];
                if !l.is_finite() {
                    return Err(Error::Diverged { epoch, step: steps });
                }
                total += l;
                tape.backward(loss)
            };
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, step: steps });
            }
            adam.update(model.params_mut(), &grads, cfg);
            steps += 1;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    if cfg.epochs > 0 {
        model.quantize();
    }
    let final_loss = epoch_losses.last().copied();
    model.meta.epochs += cfg.epochs;
    model.meta.steps += steps;
    if final_loss.is_some() {
        model.meta.final_loss = final_loss;
        model.meta.train_seed = Some(cfg.seed);
        model.meta.history_fraction = Some(cfg.history_fraction);
    }
    Ok(TrainReport {
        epochs: cfg.epochs,
        steps,
        epoch_losses,
        final_loss,
    })
}

/// Analytic versus central-difference gradients for selected
/// `(parameter, flat element)` probes on a batch of history targets.
pub fn gradient_check(
    model: &ToyModel,
    pairs: &[PairedReport],
    probes: &[(usize, usize)],
    eps: f64,
) -> Result<Vec<(f64, f64)>> {
    let samples = prepare(model, pairs)?;
    let items: Vec<(&Matrix, &[usize])> = samples.iter().map(|s| (&s.image, s.hist.as_slice())).collect();
    let batch = Batch::new(model, &items);
    let loss_at = |params: &[Matrix]| {
        let mut tape = Tape::new(params);
        let (_, loss) = forward_graph(&mut tape, model.config(), model.layout(), &batch);
        tape.value(loss).data()[0]
    };
    let analytic = {
        let mut tape = Tape::new(model.params());
        let (_, loss) = forward_graph(&mut tape, model.config(), model.layout(), &batch);
        tape.backward(loss)
    };
    let mut params = model.params().to_vec();
    let mut out = Vec::with_capacity(probes.len());
    for &(p, e) in probes {
        if p >= params.len() || e >= params[p].data().len() {
            return Err(Error::InvalidArgument(format!("probe ({p}, {e}) out of range")));
        }
        let orig = params[p].data()[e];
        params[p].data_mut()[e] = orig + eps;
        let up = loss_at(&params);
        params[p].data_mut()[e] = orig - eps;
        let down = loss_at(&params);
        params[p].data_mut()[e] = orig;
        out.push((analytic[p].data()[e], (up - down) / (2.0 * eps)));
    }
    Ok(out)
}
