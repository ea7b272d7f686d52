// SPDX-License-Identifier: MIT OR Apache-2.0

//! Greedy and beam-search decoding with optional per-step tracing.

use serde::{Deserialize, Serialize};

use super::forward::{DecoderState, Encoded, StepOutput};
use super::hooks::{HookProgram, SiteRecord};
use super::ToyModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Beam { width: usize, no_repeat_ngram: usize },
}

/// How much of each decode step to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceDetail {
    Tokens,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub max_new_tokens: usize,
    pub detail: TraceDetail,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            mode: DecodeMode::Beam {
                width: 4,
                no_repeat_ngram: 3,
            },
            max_new_tokens: 40,
            detail: TraceDetail::Tokens,
        }
    }
}

impl DecodeConfig {
    pub fn greedy() -> Self {
        Self {
            mode: DecodeMode::Greedy,
            ..Self::default()
        }
    }

    pub fn with_detail(mut self, detail: TraceDetail) -> Self {
        self.detail = detail;
        self
    }
}

/// `[layer][head][encoder position]` weights for one step.
pub type CrossAttentionStep = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    /// Generated ids, including a final `<eos>` when one was produced.
    pub tokens: Vec<usize>,
    pub step_logits: Vec<Vec<f64>>,
    pub site_states: Vec<SiteRecord>,
    pub cross_attention: Vec<CrossAttentionStep>,
}

impl GenerationTrace {
    pub fn words(&self, model: &ToyModel) -> Vec<String> {
        model.vocab().decode(&self.tokens)
    }

    /// Compact JSON-friendly view: top-`k` logits and per-layer attention
    /// entropy (mean over heads, nats) at every recorded step.
    pub fn dump(&self, model: &ToyModel, k: usize) -> TraceDump {
        let vocab = model.vocab();
        let steps = self
            .tokens
            .iter()
            .enumerate()
            .map(|(t, &id)| {
                let top_k = self.step_logits.get(t).map_or_else(Vec::new, |l| {
                    let mut idx: Vec<usize> = (0..l.len()).collect();
                    idx.sort_by(|&a, &b| l[b].total_cmp(&l[a]).then(a.cmp(&b)));
                    idx.into_iter()
                        .take(k)
                        .map(|i| (vocab.token(i).to_string(), l[i]))
                        .collect()
                });
                let attention_entropy = self.cross_attention.get(t).map_or_else(Vec::new, |layers| {
                    layers
                        .iter()
                        .map(|heads| {
                            let h: f64 = heads
                                .iter()
                                .map(|w| w.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>())
                                .sum();
                            h / heads.len().max(1) as f64
                        })
                        .collect()
                });
                StepDump {
                    token: vocab.token(id).to_string(),
                    top_k,
                    attention_entropy,
                }
            })
            .collect();
        TraceDump { steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDump {
    pub token: String,
    pub top_k: Vec<(String, f64)>,
    pub attention_entropy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDump {
    pub steps: Vec<StepDump>,
}

#[derive(Debug, Clone)]
struct Hyp {
    tokens: Vec<usize>,
    logp: f64,
    state: DecoderState,
    next: Vec<f64>,
    trace: Option<GenerationTrace>,
}

impl Hyp {
    fn record(&mut self, out: &StepOutput, records: Vec<SiteRecord>) {
        if let Some(t) = &mut self.trace {
            t.step_logits.push(out.logits.clone());
            t.cross_attention.push(out.cross_attention.clone());
            t.site_states.extend(records);
        }
    }

    fn finish(self) -> GenerationTrace {
        let mut t = self.trace.unwrap_or(GenerationTrace {
            tokens: Vec::new(),
            step_logits: Vec::new(),
            site_states: Vec::new(),
            cross_attention: Vec::new(),
        });
        // The last pending logits never produced a token.
        t.step_logits.truncate(self.tokens.len());
        t.cross_attention.truncate(self.tokens.len());
        t.tokens = self.tokens;
        t
    }

    fn score(&self) -> f64 {
        self.logp / self.tokens.len().max(1) as f64
    }
}

fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// Tokens that would complete an n-gram already present in `tokens`.
fn banned_tokens(tokens: &[usize], n: usize) -> Vec<usize> {
    if n == 0 || tokens.len() + 1 < n {
        return Vec::new();
    }
    let prefix = &tokens[tokens.len() + 1 - n..];
    tokens
        .windows(n)
        .filter(|w| &w[..n - 1] == prefix)
        .map(|w| w[n - 1])
        .collect()
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

impl ToyModel {
    /// Decodes a report for the image, applying `program` at every hooked step.
    pub fn generate(
        &self,
        enc: &Encoded,
        program: Option<&HookProgram>,
        decode: &DecodeConfig,
    ) -> Result<GenerationTrace> {
        if let Some(p) = program {
            p.validate(self.config().n_dec_layers, self.config().d_model)?;
        }
        let max_new = decode.max_new_tokens.min(self.config().max_len - 1);
        let full = decode.detail == TraceDetail::Full;
        let mut state = self.start(enc, program)?;
        let mut records = Vec::new();
        let out = self.step(enc, &mut state, self.vocab().bos(), program, full.then_some(&mut records))?;
        let mut root = Hyp {
            tokens: Vec::new(),
            logp: 0.0,
            state,
            next: out.logits.clone(),
            trace: full.then(|| GenerationTrace {
                tokens: Vec::new(),
                step_logits: Vec::new(),
                site_states: Vec::new(),
                cross_attention: Vec::new(),
            }),
        };
        root.record(&out, records);
        match decode.mode {
            DecodeMode::Greedy => self.greedy(enc, program, root, max_new, full),
            DecodeMode::Beam {
                width,
                no_repeat_ngram,
            } => {
                if width == 0 {
                    return Err(Error::InvalidArgument("beam width must be positive".into()));
                }
                self.beam(enc, program, root, max_new, full, width, no_repeat_ngram)
            }
        }
    }

    fn advance(
        &self,
        enc: &Encoded,
        program: Option<&HookProgram>,
        hyp: &mut Hyp,
        token: usize,
        full: bool,
    ) -> Result<()> {
        let mut records = Vec::new();
        let out = self.step(enc, &mut hyp.state, token, program, full.then_some(&mut records))?;
        hyp.next = out.logits.clone();
        hyp.record(&out, records);
        Ok(())
    }

    fn greedy(
        &self,
        enc: &Encoded,
        program: Option<&HookProgram>,
        mut hyp: Hyp,
        max_new: usize,
        full: bool,
    ) -> Result<GenerationTrace> {
        let eos = self.vocab().eos();
        while hyp.tokens.len() < max_new {
            let tok = argmax(&hyp.next);
            hyp.tokens.push(tok);
            if tok == eos || hyp.tokens.len() == max_new {
                break;
            }
            self.advance(enc, program, &mut hyp, tok, full)?;
        }
        Ok(hyp.finish())
    }

    #[allow(clippy::too_many_arguments)]
    fn beam(
        &self,
        enc: &Encoded,
        program: Option<&HookProgram>,
        root: Hyp,
        max_new: usize,
        full: bool,
        width: usize,
        ngram: usize,
    ) -> Result<GenerationTrace> {
        let eos = self.vocab().eos();
        let mut live = vec![root];
        let mut finished: Vec<Hyp> = Vec::new();
        for _ in 0..max_new {
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            for (h, hyp) in live.iter().enumerate() {
                let mut lp = log_softmax(&hyp.next);
                for b in banned_tokens(&hyp.tokens, ngram) {
                    lp[b] = f64::NEG_INFINITY;
                }
                let mut order: Vec<usize> = (0..lp.len()).collect();
                order.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]).then(a.cmp(&b)));
                for &tok in order.iter().take(2 * width) {
                    if lp[tok].is_finite() {
                        cands.push((hyp.logp + lp[tok], h, tok));
                    }
                }
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut next_live = Vec::with_capacity(width);
            for (logp, h, tok) in cands {
                if next_live.len() == width {
                    break;
                }
                let mut hyp = live[h].clone();
                hyp.tokens.push(tok);
                hyp.logp = logp;
                if tok == eos {
                    finished.push(hyp);
                    continue;
                }
                if hyp.tokens.len() < max_new {
                    self.advance(enc, program, &mut hyp, tok, full)?;
                }
                next_live.push(hyp);
            }
            live = next_live;
            if finished.len() >= width || live.is_empty() {
                break;
            }
        }
        if finished.is_empty() {
            finished = live;
        }
        let mut best = 0;
        for (i, h) in finished.iter().enumerate() {
            if h.score() > finished[best].score() {
                best = i;
            }
        }
        Ok(finished.swap_remove(best).finish())
    }
}
