// SPDX-License-Identifier: MIT OR Apache-2.0

//! Declared parameter ordering of the toy encoder-decoder.
//!
//! The checkpoint blob stores tensors back to back in exactly this order.

use serde::{Deserialize, Serialize};

use super::ToyModelConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormIdx {
    pub gain: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AttnIdx {
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FfnIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EncLayerIdx {
    pub ln1: NormIdx,
    pub attn: AttnIdx,
    pub ln2: NormIdx,
    pub ffn: FfnIdx,
}

#[derive(Debug, Clone, Copy)]
pub struct DecLayerIdx {
    pub ln1: NormIdx,
    pub self_attn: AttnIdx,
    pub ln2: NormIdx,
    pub cross_attn: AttnIdx,
    pub ln3: NormIdx,
    pub ffn: FfnIdx,
}

/// Parameter table plus typed indices into it.
#[derive(Debug, Clone)]
pub struct Layout {
    pub entries: Vec<ParamEntry>,
    pub enc_in_w: usize,
    pub enc_in_b: usize,
    pub enc_pos: usize,
    pub enc_layers: Vec<EncLayerIdx>,
    pub enc_lnf: NormIdx,
    pub tok_emb: usize,
    pub dec_pos: usize,
    pub dec_layers: Vec<DecLayerIdx>,
    pub dec_lnf: NormIdx,
    pub head_w: usize,
    pub head_b: usize,
}

struct Builder {
    entries: Vec<ParamEntry>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.entries.push(ParamEntry { name, rows, cols });
        self.entries.len() - 1
    }

    fn norm(&mut self, prefix: &str, d: usize) -> NormIdx {
        NormIdx {
            gain: self.add(format!("{prefix}.g"), 1, d),
            bias: self.add(format!("{prefix}.b"), 1, d),
        }
    }

    fn attn(&mut self, prefix: &str, d: usize) -> AttnIdx {
        AttnIdx {
            wq: self.add(format!("{prefix}.wq"), d, d),
            wk: self.add(format!("{prefix}.wk"), d, d),
            wv: self.add(format!("{prefix}.wv"), d, d),
            wo: self.add(format!("{prefix}.wo"), d, d),
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, hidden: usize) -> FfnIdx {
        FfnIdx {
            w1: self.add(format!("{prefix}.w1"), d, hidden),
            b1: self.add(format!("{prefix}.b1"), 1, hidden),
            w2: self.add(format!("{prefix}.w2"), hidden, d),
            b2: self.add(format!("{prefix}.b2"), 1, d),
        }
    }
}

impl Layout {
    pub fn new(cfg: &ToyModelConfig) -> Self {
        let d = cfg.d_model;
        let hidden = cfg.ffn_mult * d;
        let mut b = Builder {
            entries: Vec::new(),
        };
        let enc_in_w = b.add("enc.in.w".into(), d, d);
        let enc_in_b = b.add("enc.in.b".into(), 1, d);
        let enc_pos = b.add("enc.pos".into(), cfg.image_tokens, d);
        let enc_layers = (0..cfg.n_enc_layers)
            .map(|l| EncLayerIdx {
                ln1: b.norm(&format!("enc.{l}.ln1"), d),
                attn: b.attn(&format!("enc.{l}.attn"), d),
                ln2: b.norm(&format!("enc.{l}.ln2"), d),
                ffn: b.ffn(&format!("enc.{l}.ffn"), d, hidden),
            })
            .collect();
        let enc_lnf = b.norm("enc.lnf", d);
        let tok_emb = b.add("dec.tok".into(), cfg.vocab_size, d);
        let dec_pos = b.add("dec.pos".into(), cfg.max_len, d);
        let dec_layers = (0..cfg.n_dec_layers)
            .map(|l| DecLayerIdx {
                ln1: b.norm(&format!("dec.{l}.ln1"), d),
                self_attn: b.attn(&format!("dec.{l}.self"), d),
                ln2: b.norm(&format!("dec.{l}.ln2"), d),
                cross_attn: b.attn(&format!("dec.{l}.cross"), d),
                ln3: b.norm(&format!("dec.{l}.ln3"), d),
                ffn: b.ffn(&format!("dec.{l}.ffn"), d, hidden),
            })
            .collect();
        let dec_lnf = b.norm("dec.lnf", d);
        let head_w = b.add("head.w".into(), d, cfg.vocab_size);
        let head_b = b.add("head.b".into(), 1, cfg.vocab_size);
        Self {
            entries: b.entries,
            enc_in_w,
            enc_in_b,
            enc_pos,
            enc_layers,
            enc_lnf,
            tok_emb,
            dec_pos,
            dec_layers,
            dec_lnf,
            head_w,
            head_b,
        }
    }

    pub fn total_len(&self) -> usize {
        self.entries.iter().map(ParamEntry::len).sum()
    }

    /// Layer-norm gains and bias vectors start at 1 and 0; everything else is a weight.
    pub fn init_kind(&self, idx: usize) -> InitKind {
        let name = &self.entries[idx].name;
        if name.ends_with(".g") {
            InitKind::Ones
        } else if name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2") {
            InitKind::Zeros
        } else {
            InitKind::Gaussian
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Gaussian,
    Ones,
    Zeros,
}
