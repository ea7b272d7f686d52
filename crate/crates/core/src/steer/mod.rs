// SPDX-License-Identifier: MIT OR Apache-2.0

//! Intervention strategies, site slicing and removable plans.

mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use sweep::{
    read_sweep_csv, run_sweep, write_sweep_csv, CaseOutput, ConditionRun, ConditionStatus, SweepResult, SweepRow,
    SweepSpec, BASELINE_CONDITION, FINE_GRID, GENTLE_GRID,
};

use crate::error::{Error, Result};
use crate::forge::{Geometry, SteeringVector};
use crate::linalg::{l2_normalize, norm, Vector, ZERO_NORM};
use crate::model::{DecodeConfig, GenerationTrace, HookProgram, HookSite, ToyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Embedding output plus every decoder layer output.
    GlobalInjection,
    /// Every decoder layer output, embeddings excluded.
    SteerfairLayerOutput,
    /// Every self-attention output.
    SteerfairAttentionOutput,
    /// Additive push on the first-layer position-0 state.
    GentleInject,
    /// Steering pseudo-token ahead of the decoder input.
    IcvToken,
    /// Steering row appended to the encoder memory.
    EncoderConcat,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::GlobalInjection,
        Strategy::SteerfairLayerOutput,
        Strategy::SteerfairAttentionOutput,
        Strategy::GentleInject,
        Strategy::IcvToken,
        Strategy::EncoderConcat,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GlobalInjection => "global_injection",
            Self::SteerfairLayerOutput => "steerfair_layer_output",
            Self::SteerfairAttentionOutput => "steerfair_attention_output",
            Self::GentleInject => "gentle_inject",
            Self::IcvToken => "icv_token",
            Self::EncoderConcat => "encoder_concat",
        }
    }

    pub fn sites(&self, n_dec_layers: usize) -> Vec<HookSite> {
        match self {
            Self::GlobalInjection => std::iter::once(HookSite::EmbeddingOutput)
                .chain((0..n_dec_layers).map(HookSite::LayerOutput))
                .collect(),
            Self::SteerfairLayerOutput => (0..n_dec_layers).map(HookSite::LayerOutput).collect(),
            Self::SteerfairAttentionOutput => (0..n_dec_layers).map(HookSite::AttentionOutput).collect(),
            Self::GentleInject => vec![HookSite::FirstLayerCls],
            Self::IcvToken => vec![HookSite::DecoderInputPrefix],
            Self::EncoderConcat => vec![HookSite::EncoderOutputConcat],
        }
    }

    /// Whether the strategy uses the coarse strength grid.
    pub fn is_additive(&self) -> bool {
        matches!(self, Self::GentleInject)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Plan(format!("unknown strategy `{s}`")))
    }
}

/// How a multi-layer vector becomes one `d_model` vector per site.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceMode {
    /// Each layer-indexed site reads its own segment.
    #[default]
    PerLayer,
    /// Every site reads the mean of all segments.
    SharedMean,
}

fn segment_mean(v: &[f64], g: Geometry) -> Vec<f64> {
    let mut out = vec![0.0; g.d_model];
    for s in 0..g.segments {
        for (o, x) in out.iter_mut().zip(g.segment(v, s)) {
            *o += x / g.segments as f64;
        }
    }
    out
}

fn unit(x: &[f64]) -> Result<Vector> {
    let n = norm(x);
    if n < ZERO_NORM {
        return Err(Error::Cancellation { norm: n });
    }
    l2_normalize(x)
}

/// The `d_model` vector injected at `site`.
///
/// Norm-preserving sites and the token/concat sites receive unit vectors.
/// The additive first-layer site receives segment 1 of the unit-normalized
/// full vector, so its magnitude reflects that layer's share of the direction.
pub fn slice_vector_for_site(v: &SteeringVector, site: HookSite, geometry: Geometry, mode: SliceMode) -> Result<Vector> {
    if v.geometry != geometry {
        return Err(Error::Geometry(format!(
            "vector geometry {:?} does not match model geometry {:?}",
            v.geometry, geometry
        )));
    }
    geometry.check(&v.v)?;
    match (site, site.segment(), mode) {
        (HookSite::FirstLayerCls, _, mode) => {
            let full = unit(&v.v)?;
            if geometry.segments < 2 {
                return Ok(full);
            }
            Ok(Vector(match mode {
                SliceMode::PerLayer => geometry.segment(&full, 1).to_vec(),
                SliceMode::SharedMean => segment_mean(&full, geometry),
            }))
        }
        (_, Some(s), SliceMode::PerLayer) => unit(geometry.segment(&v.v, s)),
        _ => unit(&segment_mean(&v.v, geometry)),
    }
}

/// A strategy, strength and vector, not yet bound to a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub strategy: Strategy,
    pub lambda: f64,
    pub vector: SteeringVector,
    #[serde(default)]
    pub slicing: SliceMode,
    #[serde(default)]
    pub decay: Option<f64>,
}

impl InjectionPlan {
    pub fn new(strategy: Strategy, lambda: f64, vector: SteeringVector) -> Self {
        Self {
            strategy,
            lambda,
            vector,
            slicing: SliceMode::default(),
            decay: None,
        }
    }

    /// Resolves sites and per-site vectors for `model`.
    pub fn program(&self, model: &ToyModel) -> Result<HookProgram> {
        let cfg = model.config();
        let geometry = Geometry {
            segments: cfg.n_segments(),
            d_model: cfg.d_model,
        };
        let sites = self
            .strategy
            .sites(cfg.n_dec_layers)
            .into_iter()
            .map(|s| Ok((s, slice_vector_for_site(&self.vector, s, geometry, self.slicing)?)))
            .collect::<Result<Vec<_>>>()?;
        let program = HookProgram::new(self.lambda, self.decay, sites)?;
        program.validate(cfg.n_dec_layers, cfg.d_model)?;
        Ok(program)
    }
}

/// A model with at most one plan attached.
#[derive(Debug)]
pub struct HookedModel<'m> {
    model: &'m ToyModel,
    active: Option<(InjectionPlan, HookProgram)>,
}

impl<'m> HookedModel<'m> {
    pub fn new(model: &'m ToyModel) -> Self {
        Self { model, active: None }
    }

    pub fn model(&self) -> &ToyModel {
        self.model
    }

    pub fn apply(&mut self, plan: InjectionPlan) -> Result<()> {
        if self.active.is_some() {
            return Err(Error::PlanConflict);
        }
        let program = plan.program(self.model)?;
        self.active = Some((plan, program));
        Ok(())
    }

    pub fn remove(&mut self) -> Option<InjectionPlan> {
        self.active.take().map(|(p, _)| p)
    }

    pub fn plan(&self) -> Option<&InjectionPlan> {
        self.active.as_ref().map(|(p, _)| p)
    }

    pub fn program(&self) -> Option<&HookProgram> {
        self.active.as_ref().map(|(_, p)| p)
    }

    pub fn generate(&self, image_id: &str, reference: &[String], decode: &DecodeConfig) -> Result<GenerationTrace> {
        let program = self.program();
        let enc = self.model.encode(&self.model.image(image_id, reference), program)?;
        self.model.generate(&enc, program, decode)
    }
}
