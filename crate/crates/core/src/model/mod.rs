// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small pre-norm encoder-decoder transformer with hookable decoder sites.
//!
//! Parameters are held at single precision (every value is exactly an
//! `f32`), while all arithmetic runs in `f64`.

mod checkpoint;
mod forward;
mod generate;
mod hooks;
mod image;
mod inject;
mod layout;
mod nn;
mod tape;
mod train;
mod vocab;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use forward::{DecoderState, Encoded, TeacherForced};
pub use generate::{CrossAttentionStep, DecodeConfig, DecodeMode, GenerationTrace, StepDump, TraceDetail, TraceDump};
pub use hooks::{HookProgram, HookSite, SiteRecord};
pub use image::{string_seed, SyntheticImage};
pub use inject::{norm_preserving_inject, CANCELLATION_NORM, UNIT_TOL};
pub use layout::{Layout, ParamEntry};
pub use train::{gradient_check, train, TrainConfig, TrainReport};
pub use vocab::{Vocab, BOS, EOS, PAD};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const INIT_SCALE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyModelConfig {
    pub d_model: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    /// Filled from the vocabulary when zero.
    pub vocab_size: usize,
    pub max_len: usize,
    pub image_tokens: usize,
    pub seed: u64,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self {
            d_model: 32,
            n_enc_layers: 2,
            n_dec_layers: 2,
            n_heads: 2,
            ffn_mult: 4,
            vocab_size: 0,
            max_len: 64,
            image_tokens: 16,
            seed: 0,
        }
    }
}

impl ToyModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelConfig(m));
        if self.d_model == 0 || self.n_heads == 0 {
            return bad("d_model and n_heads must be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.n_dec_layers == 0 {
            return bad("need at least one decoder layer".into());
        }
        if self.ffn_mult == 0 || self.max_len < 2 || self.image_tokens == 0 {
            return bad("ffn_mult, max_len and image_tokens must be positive".into());
        }
        if self.vocab_size < 4 {
            return bad(format!("vocab_size {} too small", self.vocab_size));
        }
        Ok(())
    }

    /// Number of multi-layer vector segments: the embedding plus each decoder layer.
    pub fn n_segments(&self) -> usize {
        self.n_dec_layers + 1
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Training metadata carried in checkpoints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub train_seed: Option<u64>,
    pub history_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    config: ToyModelConfig,
    vocab: Vocab,
    layout: Layout,
    params: Vec<Matrix>,
    pub meta: TrainingMeta,
}

impl PartialEq for Layout {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

impl ToyModel {
    /// Seeded initialization: Gaussian weights with standard deviation 0.02,
    /// unit layer-norm gains, zero biases.
    pub fn init(mut config: ToyModelConfig, vocab: Vocab) -> Result<Self> {
        if config.vocab_size == 0 {
            config.vocab_size = vocab.len();
        }
        config.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(Error::ModelConfig(format!(
                "vocab_size {} does not match vocabulary of {} tokens",
                config.vocab_size,
                vocab.len()
            )));
        }
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, INIT_SCALE).expect("valid normal");
        let params = (0..layout.entries.len())
            .map(|i| {
                let e = &layout.entries[i];
                let mut m = Matrix::zeros(e.rows, e.cols);
                match layout.init_kind(i) {
                    layout::InitKind::Gaussian => {
                        for x in m.data_mut() {
                            *x = round_f32(normal.sample(&mut rng));
                        }
                    }
                    layout::InitKind::Ones => m.data_mut().fill(1.0),
                    layout::InitKind::Zeros => {}
                }
                m
            })
            .collect();
        Ok(Self {
            config,
            vocab,
            layout,
            params,
            meta: TrainingMeta::default(),
        })
    }

    pub(crate) fn from_parts(
        config: ToyModelConfig,
        vocab: Vocab,
        params: Vec<Matrix>,
        meta: TrainingMeta,
    ) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.entries.len()
            || params
                .iter()
                .zip(&layout.entries)
                .any(|(p, e)| p.rows() != e.rows || p.cols() != e.cols)
        {
            return Err(Error::Checkpoint("parameter shapes do not match layout".into()));
        }
        Ok(Self {
            config,
            vocab,
            layout,
            params,
            meta,
        })
    }

    pub fn config(&self) -> &ToyModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[Matrix] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.layout.total_len()
    }

    /// Parameters as the little-endian `f32` blob stored in checkpoints.
    pub fn param_blob(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n_params() * 4);
        for p in &self.params {
            for &x in p.data() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }

    /// SHA-256 of the parameter blob, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.param_blob()))
    }

    /// Synthetic image for a case, derived from its id and history-free report.
    pub fn image(&self, image_id: &str, reference: &[String]) -> SyntheticImage {
        SyntheticImage::from_reference(
            image_id,
            reference,
            self.config.image_tokens,
            self.config.d_model,
        )
    }

    pub(crate) fn quantize(&mut self) {
        for p in &mut self.params {
            for x in p.data_mut() {
                *x = round_f32(*x);
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::corpus::CueDictionary;

    pub fn tiny_model(seed: u64) -> ToyModel {
        let vocab = Vocab::standard(&CueDictionary::standard());
        let cfg = ToyModelConfig {
            d_model: 8,
            n_heads: 2,
            max_len: 24,
            image_tokens: 16,
            seed,
            ..ToyModelConfig::default()
        };
        ToyModel::init(cfg, vocab).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::tiny_model;
    use super::*;
    use crate::corpus::CueDictionary;

    #[test]
    fn init_is_seeded() {
        assert_eq!(tiny_model(1).checksum(), tiny_model(1).checksum());
        assert_ne!(tiny_model(1).checksum(), tiny_model(2).checksum());
    }

    #[test]
    fn indivisible_heads_rejected() {
        let vocab = Vocab::standard(&CueDictionary::standard());
        let cfg = ToyModelConfig {
            d_model: 33,
            n_heads: 2,
            ..ToyModelConfig::default()
        };
        assert!(matches!(ToyModel::init(cfg, vocab), Err(Error::ModelConfig(_))));
    }

    #[test]
    fn vocabulary_size_is_modest() {
        let v = Vocab::standard(&CueDictionary::standard());
        assert!(v.len() > 80 && v.len() < 250, "{}", v.len());
    }
}
