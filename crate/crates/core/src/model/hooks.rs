// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hook sites and the resolved per-site injection program consumed by decoding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// A place in the decoder where a steering vector can act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "layer", rename_all = "snake_case")]
pub enum HookSite {
    /// Token plus position embedding, before the first decoder layer.
    EmbeddingOutput,
    /// Residual stream after decoder layer `l`.
    LayerOutput(usize),
    /// Self-attention sublayer output of layer `l`, before the residual add.
    AttentionOutput(usize),
    /// Position-0 state after the first decoder layer, additive.
    FirstLayerCls,
    /// One pseudo-token placed ahead of the decoder input.
    DecoderInputPrefix,
    /// One extra row appended to the encoder memory.
    EncoderOutputConcat,
}

impl HookSite {
    pub fn layer(&self) -> Option<usize> {
        match self {
            Self::LayerOutput(l) | Self::AttentionOutput(l) => Some(*l),
            _ => None,
        }
    }

    /// Index of the multi-layer vector segment this site reads.
    pub fn segment(&self) -> Option<usize> {
        match self {
            Self::EmbeddingOutput => Some(0),
            Self::LayerOutput(l) | Self::AttentionOutput(l) => Some(l + 1),
            Self::FirstLayerCls => Some(1),
            Self::DecoderInputPrefix | Self::EncoderOutputConcat => None,
        }
    }

    pub fn is_norm_preserving(&self) -> bool {
        matches!(
            self,
            Self::EmbeddingOutput | Self::LayerOutput(_) | Self::AttentionOutput(_)
        )
    }

    pub fn validate(&self, n_dec_layers: usize) -> Result<()> {
        match self.layer() {
            Some(l) if l >= n_dec_layers => Err(Error::Plan(format!(
                "site {self} out of range for {n_dec_layers} decoder layers"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for HookSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmbeddingOutput => write!(f, "embedding_output"),
            Self::LayerOutput(l) => write!(f, "layer_output({l})"),
            Self::AttentionOutput(l) => write!(f, "attention_output({l})"),
            Self::FirstLayerCls => write!(f, "first_layer_cls"),
            Self::DecoderInputPrefix => write!(f, "decoder_input_prefix"),
            Self::EncoderOutputConcat => write!(f, "encoder_output_concat"),
        }
    }
}

/// Per-site `d_model` vectors plus strength schedule, ready for the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct HookProgram {
    pub lambda: f64,
    pub decay: Option<f64>,
    pub sites: Vec<(HookSite, Vector)>,
}

impl HookProgram {
    pub fn new(lambda: f64, decay: Option<f64>, sites: Vec<(HookSite, Vector)>) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::NonFinite("lambda"));
        }
        if let Some(g) = decay {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Plan(format!("decay {g} outside (0, 1]")));
            }
        }
        Ok(Self {
            lambda,
            decay,
            sites,
        })
    }

    /// Strength at decode step `t`.
    pub fn lambda_at(&self, step: usize) -> f64 {
        match self.decay {
            Some(g) => self.lambda * g.powi(step as i32),
            None => self.lambda,
        }
    }

    pub fn vector(&self, site: HookSite) -> Option<&Vector> {
        self.sites.iter().find(|(s, _)| *s == site).map(|(_, v)| v)
    }

    pub fn validate(&self, n_dec_layers: usize, d_model: usize) -> Result<()> {
        for (site, v) in &self.sites {
            site.validate(n_dec_layers)?;
            if v.dim() != d_model {
                return Err(Error::Plan(format!(
                    "site {site} vector has dim {}, model width is {d_model}",
                    v.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Norms of one hooked state before and after injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub site: HookSite,
    pub step: usize,
    pub pre_norm: f64,
    pub post_norm: f64,
}
