// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-sequence inference with an incremental key/value cache.
//!
//! Processing a sequence one position at a time gives the same states as a
//! full causal recompute, so hooks applied at each new position are
//! equivalent to hooking every position of the full pass.

use super::hooks::{HookProgram, HookSite, SiteRecord};
use super::image::SyntheticImage;
use super::inject::norm_preserving_inject;
use super::layout::{AttnIdx, NormIdx};
use super::nn::{add_assign, gelu, layer_norm, linear, softmax_in_place};
use super::ToyModel;
use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};

/// Encoder memory plus the per-layer cross-attention keys and values.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub memory: Matrix,
    keys: Vec<Matrix>,
    values: Vec<Matrix>,
}

impl Encoded {
    pub fn positions(&self) -> usize {
        self.memory.rows()
    }
}

/// Growing self-attention cache for one hypothesis.
#[derive(Debug, Clone)]
pub struct DecoderState {
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    cached: usize,
    position: usize,
}

impl DecoderState {
    pub fn new(n_layers: usize) -> Self {
        Self {
            keys: vec![Vec::new(); n_layers],
            values: vec![Vec::new(); n_layers],
            cached: 0,
            position: 0,
        }
    }

    /// Next real token position.
    pub fn position(&self) -> usize {
        self.position
    }
}

/// Outputs of one decoder position.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub logits: Vec<f64>,
    /// Embedding output followed by each layer output.
    pub segments: Vec<Vec<f64>>,
    /// `[layer][head][encoder position]`.
    pub cross_attention: Vec<Vec<Vec<f64>>>,
}

/// Teacher-forced pass over a full input sequence.
#[derive(Debug, Clone)]
pub struct TeacherForced {
    pub logits: Vec<Vec<f64>>,
    pub segments: Vec<Vec<Vec<f64>>>,
    pub cross_attention: Vec<Vec<Vec<Vec<f64>>>>,
}

fn attend(
    q: &[f64],
    keys: &[f64],
    values: &[f64],
    n: usize,
    heads: usize,
    extra: Option<&mut Vec<Vec<f64>>>,
) -> Vec<f64> {
    let d = q.len();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![0.0; d];
    let mut weights_out = Vec::with_capacity(heads);
    for h in 0..heads {
        let lo = h * dh;
        let qh = &q[lo..lo + dh];
        let mut w: Vec<f64> = (0..n)
            .map(|j| {
                let k = &keys[j * d + lo..j * d + lo + dh];
                qh.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale
            })
            .collect();
        softmax_in_place(&mut w);
        for (j, &p) in w.iter().enumerate() {
            let v = &values[j * d + lo..j * d + lo + dh];
            for (o, x) in out[lo..lo + dh].iter_mut().zip(v) {
                *o += p * x;
            }
        }
        weights_out.push(w);
    }
    if let Some(slot) = extra {
        *slot = weights_out;
    }
    out
}

impl ToyModel {
    fn p(&self, idx: usize) -> &Matrix {
        &self.params()[idx]
    }

    fn ln(&self, x: &[f64], n: NormIdx) -> Vec<f64> {
        layer_norm(x, self.p(n.gain).data(), self.p(n.bias).data())
    }

    fn ffn_row(&self, x: &[f64], f: super::layout::FfnIdx) -> Vec<f64> {
        let mut hidden = linear(x, self.p(f.w1), Some(self.p(f.b1)));
        for v in hidden.iter_mut() {
            *v = gelu(*v);
        }
        linear(&hidden, self.p(f.w2), Some(self.p(f.b2)))
    }

    fn project_rows(&self, x: &Matrix, w: usize) -> Matrix {
        x.matmul(self.p(w)).expect("layout shapes agree")
    }

    /// Mean row norm of the token embedding table.
    pub fn mean_token_embedding_norm(&self) -> f64 {
        let e = self.p(self.layout().tok_emb);
        (0..e.rows()).map(|i| norm(e.row(i))).sum::<f64>() / e.rows() as f64
    }

    fn encoder_self_attention(&self, x: &Matrix, a: AttnIdx) -> Matrix {
        let heads = self.config().n_heads;
        let q = self.project_rows(x, a.wq);
        let k = self.project_rows(x, a.wk);
        let v = self.project_rows(x, a.wv);
        let n = x.rows();
        let mut ctx = Matrix::zeros(n, x.cols());
        for i in 0..n {
            let o = attend(q.row(i), k.data(), v.data(), n, heads, None);
            ctx.row_mut(i).copy_from_slice(&o);
        }
        self.project_rows(&ctx, a.wo)
    }

    /// Runs the encoder; an `encoder_output_concat` site appends one extra memory row.
    pub fn encode(&self, image: &SyntheticImage, program: Option<&HookProgram>) -> Result<Encoded> {
        let cfg = self.config();
        let lay = self.layout();
        if image.features.rows() != cfg.image_tokens || image.features.cols() != cfg.d_model {
            return Err(Error::Shape(format!(
                "image is {}x{}, model expects {}x{}",
                image.features.rows(),
                image.features.cols(),
                cfg.image_tokens,
                cfg.d_model
            )));
        }
        let mut x = self.project_rows(&image.features, lay.enc_in_w);
        let bias = self.p(lay.enc_in_b).data();
        let pos = self.p(lay.enc_pos);
        for i in 0..x.rows() {
            let r = x.row_mut(i);
            add_assign(r, bias);
            add_assign(r, pos.row(i));
        }
        for layer in &lay.enc_layers {
            let normed = self.map_rows(&x, |r| self.ln(r, layer.ln1));
            let a = self.encoder_self_attention(&normed, layer.attn);
            for i in 0..x.rows() {
                add_assign(x.row_mut(i), a.row(i));
            }
            for i in 0..x.rows() {
                let f = self.ffn_row(&self.ln(x.row(i), layer.ln2), layer.ffn);
                add_assign(x.row_mut(i), &f);
            }
        }
        let mut memory = self.map_rows(&x, |r| self.ln(r, lay.enc_lnf));
        if let Some(prog) = program {
            if let Some(u) = prog.vector(HookSite::EncoderOutputConcat) {
                if prog.lambda != 0.0 {
                    let scale = (0..memory.rows()).map(|i| norm(memory.row(i))).sum::<f64>()
                        / memory.rows() as f64;
                    let extra: Vec<f64> = u.iter().map(|x| prog.lambda * scale * x).collect();
                    let mut rows: Vec<Vec<f64>> =
                        (0..memory.rows()).map(|i| memory.row(i).to_vec()).collect();
                    rows.push(extra);
                    memory = Matrix::from_rows(&rows)?;
                }
            }
        }
        let keys = lay
            .dec_layers
            .iter()
            .map(|l| self.project_rows(&memory, l.cross_attn.wk))
            .collect();
        let values = lay
            .dec_layers
            .iter()
            .map(|l| self.project_rows(&memory, l.cross_attn.wv))
            .collect();
        Ok(Encoded {
            memory,
            keys,
            values,
        })
    }

    fn map_rows(&self, x: &Matrix, f: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&f(x.row(i)));
        }
        out
    }

    fn inject_site(
        &self,
        h: &mut Vec<f64>,
        site: HookSite,
        program: Option<&HookProgram>,
        step: usize,
        records: &mut Option<&mut Vec<SiteRecord>>,
    ) -> Result<()> {
        let Some(prog) = program else { return Ok(()) };
        let Some(v) = prog.vector(site) else { return Ok(()) };
        let lambda = prog.lambda_at(step);
        let pre = norm(h);
        let out = norm_preserving_inject(h, v, lambda)?;
        *h = out;
        if let Some(r) = records.as_deref_mut() {
            r.push(SiteRecord {
                site,
                step,
                pre_norm: pre,
                post_norm: norm(h),
            });
        }
        Ok(())
    }

    /// Pushes one input row through the decoder stack, extending the cache.
    #[allow(clippy::too_many_arguments)]
    fn decode_row(
        &self,
        enc: &Encoded,
        state: &mut DecoderState,
        mut x: Vec<f64>,
        program: Option<&HookProgram>,
        step: usize,
        hooked: bool,
        mut records: Option<&mut Vec<SiteRecord>>,
    ) -> Result<StepOutput> {
        let cfg = self.config();
        let lay = self.layout();
        let heads = cfg.n_heads;
        let program = if hooked { program } else { None };
        self.inject_site(&mut x, HookSite::EmbeddingOutput, program, step, &mut records)?;
        let mut segments = Vec::with_capacity(cfg.n_segments());
        segments.push(x.clone());
        let mut cross_attention = Vec::with_capacity(cfg.n_dec_layers);
        let n_self = state.cached + 1;
        for (l, layer) in lay.dec_layers.iter().enumerate() {
            let normed = self.ln(&x, layer.ln1);
            let q = linear(&normed, self.p(layer.self_attn.wq), None);
            let k = linear(&normed, self.p(layer.self_attn.wk), None);
            let v = linear(&normed, self.p(layer.self_attn.wv), None);
            state.keys[l].extend_from_slice(&k);
            state.values[l].extend_from_slice(&v);
            let ctx = attend(&q, &state.keys[l], &state.values[l], n_self, heads, None);
            let mut a = linear(&ctx, self.p(layer.self_attn.wo), None);
            self.inject_site(&mut a, HookSite::AttentionOutput(l), program, step, &mut records)?;
            add_assign(&mut x, &a);

            let normed = self.ln(&x, layer.ln2);
            let q = linear(&normed, self.p(layer.cross_attn.wq), None);
            let mut weights = Vec::new();
            let ctx = attend(
                &q,
                enc.keys[l].data(),
                enc.values[l].data(),
                enc.positions(),
                heads,
                Some(&mut weights),
            );
            cross_attention.push(weights);
            let c = linear(&ctx, self.p(layer.cross_attn.wo), None);
            add_assign(&mut x, &c);

            let f = self.ffn_row(&self.ln(&x, layer.ln3), layer.ffn);
            add_assign(&mut x, &f);
            self.inject_site(&mut x, HookSite::LayerOutput(l), program, step, &mut records)?;
            if l == 0 && hooked && state.position == 0 {
                if let Some(prog) = program {
                    if let Some(v) = prog.vector(HookSite::FirstLayerCls) {
                        let lambda = prog.lambda_at(step);
                        let pre = norm(&x);
                        for (h, u) in x.iter_mut().zip(v.iter()) {
                            *h += lambda * u;
                        }
                        if let Some(r) = records.as_deref_mut() {
                            r.push(SiteRecord {
                                site: HookSite::FirstLayerCls,
                                step,
                                pre_norm: pre,
                                post_norm: norm(&x),
                            });
                        }
                    }
                }
            }
            segments.push(x.clone());
        }
        state.cached += 1;
        let normed = self.ln(&x, lay.dec_lnf);
        let logits = linear(&normed, self.p(lay.head_w), Some(self.p(lay.head_b)));
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        Ok(StepOutput {
            logits,
            segments,
            cross_attention,
        })
    }

    /// Places the pseudo-token of a `decoder_input_prefix` site ahead of position 0.
    pub fn start(&self, enc: &Encoded, program: Option<&HookProgram>) -> Result<DecoderState> {
        let mut state = DecoderState::new(self.config().n_dec_layers);
        if let Some(prog) = program {
            if let Some(u) = prog.vector(HookSite::DecoderInputPrefix) {
                if prog.lambda != 0.0 {
                    let scale = prog.lambda * self.mean_token_embedding_norm();
                    let row: Vec<f64> = u.iter().map(|x| scale * x).collect();
                    self.decode_row(enc, &mut state, row, None, 0, false, None)?;
                }
            }
        }
        Ok(state)
    }

    /// Feeds `token` at the state's next position.
    pub fn step(
        &self,
        enc: &Encoded,
        state: &mut DecoderState,
        token: usize,
        program: Option<&HookProgram>,
        records: Option<&mut Vec<SiteRecord>>,
    ) -> Result<StepOutput> {
        let cfg = self.config();
        let lay = self.layout();
        if token >= cfg.vocab_size {
            return Err(Error::UnknownToken(format!("id {token}")));
        }
        if state.position >= cfg.max_len {
            return Err(Error::InvalidArgument(format!(
                "position {} exceeds max_len {}",
                state.position, cfg.max_len
            )));
        }
        let mut x = self.p(lay.tok_emb).row(token).to_vec();
        add_assign(&mut x, self.p(lay.dec_pos).row(state.position));
        let step = state.position;
        let out = self.decode_row(enc, state, x, program, step, true, records)?;
        state.position += 1;
        Ok(out)
    }

    /// Runs every input id through the decoder with no sampling.
    pub fn teacher_force(
        &self,
        enc: &Encoded,
        inputs: &[usize],
        program: Option<&HookProgram>,
        mut records: Option<&mut Vec<SiteRecord>>,
    ) -> Result<TeacherForced> {
        let mut state = self.start(enc, program)?;
        let mut tf = TeacherForced {
            logits: Vec::with_capacity(inputs.len()),
            segments: Vec::with_capacity(inputs.len()),
            cross_attention: Vec::with_capacity(inputs.len()),
        };
        for &id in inputs {
            let out = self.step(enc, &mut state, id, program, records.as_deref_mut())?;
            tf.logits.push(out.logits);
            tf.segments.push(out.segments);
            tf.cross_attention.push(out.cross_attention);
        }
        Ok(tf)
    }

    /// Final-token hidden states of `report` for every segment, embedding first.
    ///
    /// The decoder reads `<bos>` followed by the report under teacher forcing.
    pub fn extract_activations(&self, image_id: &str, image_reference: &[String], report: &[String]) -> Result<Vec<Vec<f64>>> {
        if report.is_empty() {
            return Err(Error::InvalidArgument("empty report".into()));
        }
        if report.len() + 1 > self.config().max_len {
            return Err(Error::InvalidArgument(format!(
                "report of {} tokens exceeds max_len {}",
                report.len(),
                self.config().max_len
            )));
        }
        let mut inputs = vec![self.vocab().bos()];
        inputs.extend(self.vocab().encode(report)?);
        let enc = self.encode(&self.image(image_id, image_reference), None)?;
        let mut tf = self.teacher_force(&enc, &inputs, None, None)?;
        Ok(tf.segments.pop().expect("non-empty input"))
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::tiny_model;
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn activations_have_one_state_per_segment() {
        let m = tiny_model(3);
        let r = tokenize("mild left effusion .");
        let s = m.extract_activations("img-1", &r, &r).unwrap();
        assert_eq!(s.len(), m.config().n_segments());
        assert!(s.iter().all(|h| h.len() == m.config().d_model));
        assert_eq!(s, m.extract_activations("img-1", &r, &r).unwrap());
        let r2 = tokenize("mild left effusion stable");
        assert_ne!(s, m.extract_activations("img-1", &r, &r2).unwrap());
    }

    #[test]
    fn unknown_token_rejected() {
        let m = tiny_model(3);
        let r = tokenize("mild zebra .");
        assert!(matches!(
            m.extract_activations("img-1", &r, &r),
            Err(Error::UnknownToken(_))
        ));
    }

    #[test]
    fn cross_attention_rows_are_distributions() {
        let m = tiny_model(4);
        let r = tokenize("small right opacity .");
        let enc = m.encode(&m.image("x", &r), None).unwrap();
        let ids = m.vocab().encode(&r).unwrap();
        let tf = m.teacher_force(&enc, &ids, None, None).unwrap();
        for step in &tf.cross_attention {
            for layer in step {
                for head in layer {
                    assert!((head.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
