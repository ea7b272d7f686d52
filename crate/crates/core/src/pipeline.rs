// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end wiring shared by the command-line tool, examples and tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::ActivationBundle;
use crate::corpus::{gen_corpus, Corpus, CorpusConfig, CueDictionary, EvalCase, LabelLexicon, PairedReport};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_sweep, EvalOptions, EvalReport};
use crate::forge::{
    build_mcv, classed_diffs, control_vector, ActivationTable, diff_matrix, global_icv_sweep, sdiv, specific50_icv, style_basis,
    ControlKind, Geometry, Mcv, Role, SdivOutcome, SteeringVector, ICV_K_GRID, STYLE_K,
};
use crate::linalg::Matrix;
use crate::metrics::{attention_records, AttentionRecord, LogisticJudge, ProbeInput};
use crate::model::{train, DecodeConfig, ToyModel, ToyModelConfig, TraceDetail, TrainConfig, TrainReport, Vocab};
use crate::steer::{run_sweep, SweepResult, SweepSpec};

pub const BACKBONE: &str = "sdls-toy";

/// Everything needed to go from a seed to an evaluated sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub corpus: CorpusConfig,
    pub model: ToyModelConfig,
    pub train: TrainConfig,
    pub icv_k: Vec<usize>,
    pub style_k: usize,
    pub control_seed: u64,
    pub sweep: SweepSpec,
    pub eval: EvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusConfig::default(),
            model: ToyModelConfig::default(),
            train: TrainConfig::default(),
            icv_k: ICV_K_GRID.to_vec(),
            style_k: STYLE_K,
            control_seed: 17,
            sweep: SweepSpec::default(),
            eval: EvalOptions::default(),
        }
    }
}

pub fn model_geometry(model: &ToyModel) -> Geometry {
    Geometry {
        segments: model.config().n_segments(),
        d_model: model.config().d_model,
    }
}

/// Builds and trains a model on `corpus` from a fresh initialization.
pub fn train_model(
    corpus: &Corpus,
    dict: &CueDictionary,
    model_cfg: &ToyModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(ToyModel, TrainReport)> {
    let mut model = ToyModel::init(model_cfg.clone(), Vocab::standard(dict))?;
    let report = train(&mut model, &corpus.pairs, train_cfg)?;
    Ok((model, report))
}

/// Both multi-layer vectors of every pair, hist then curr, in pair order.
pub fn extract_mcvs(model: &ToyModel, pairs: &[PairedReport]) -> Result<Vec<Mcv>> {
    let per_pair: Vec<[Mcv; 2]> = pairs
        .par_iter()
        .map(|p| {
            let one = |role, report: &[String]| {
                let states = model.extract_activations(&p.image_id, &p.r_curr, report)?;
                build_mcv(&states, &p.image_id, role)
            };
            Ok([one(Role::Hist, &p.r_hist)?, one(Role::Curr, &p.r_curr)?])
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

pub fn extract_bundle(
    model: &ToyModel,
    pairs: &[PairedReport],
    provenance: Option<serde_json::Value>,
) -> Result<ActivationBundle> {
    let mcvs = extract_mcvs(model, pairs)?;
    ActivationBundle::new(BACKBONE, model_geometry(model), &mcvs, provenance)
}

/// The full vector arsenal built from one bundle.
#[derive(Debug, Clone)]
pub struct VectorSet {
    pub global_icv: Vec<SteeringVector>,
    pub specific50: Vec<SteeringVector>,
    pub sdiv: SdivOutcome,
    /// Random, shuffled and orthogonal controls, referenced on SDIV.
    pub controls: Vec<SteeringVector>,
    /// Global ICV at each k with the history-free style subspace removed.
    pub style_ortho: Vec<SteeringVector>,
}

impl VectorSet {
    pub fn all(&self) -> Vec<&SteeringVector> {
        self.global_icv
            .iter()
            .chain(&self.specific50)
            .chain(std::iter::once(&self.sdiv.vector))
            .chain(&self.controls)
            .chain(&self.style_ortho)
            .collect()
    }
}

/// Pairs that actually carry history language; history-free pairs have
/// identical reports and contribute zero differences.
fn history_pairs(pairs: &[PairedReport]) -> Vec<PairedReport> {
    pairs.iter().filter(|p| p.r_hist != p.r_curr).cloned().collect()
}

/// Vector families that [`forge_selected`] can build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorFamily {
    GlobalIcv,
    Specific50,
    Sdiv,
    Controls,
    StyleOrtho,
}

impl VectorFamily {
    pub const ALL: [VectorFamily; 5] = [
        VectorFamily::GlobalIcv,
        VectorFamily::Specific50,
        VectorFamily::Sdiv,
        VectorFamily::Controls,
        VectorFamily::StyleOrtho,
    ];
}

struct Forge<'a> {
    bundle: &'a ActivationBundle,
    table: ActivationTable,
    hist: Vec<PairedReport>,
    dict: &'a CueDictionary,
    icv_k: &'a [usize],
    style_k: usize,
    control_seed: u64,
}

impl Forge<'_> {
    fn stamp(&self, mut v: SteeringVector) -> SteeringVector {
        v.provenance.bundle_checksum = Some(self.bundle.checksum().to_string());
        v
    }

    fn global_icv(&self) -> Result<Vec<SteeringVector>> {
        let d = diff_matrix(&self.hist, &self.table)?;
        Ok(global_icv_sweep(&d, self.icv_k, self.bundle.geometry())?
            .into_iter()
            .map(|v| self.stamp(v))
            .collect())
    }

    fn specific50(&self) -> Result<Vec<SteeringVector>> {
        self.icv_k
            .iter()
            .map(|&k| Ok(self.stamp(specific50_icv(&self.hist, &self.table, k)?)))
            .collect()
    }

    fn sdiv(&self) -> Result<SdivOutcome> {
        let mut out = sdiv(&classed_diffs(&self.hist, &self.table, self.dict)?, self.bundle.geometry())?;
        out.vector = self.stamp(out.vector);
        Ok(out)
    }

    fn controls(&self, reference: &SteeringVector) -> Result<Vec<SteeringVector>> {
        [ControlKind::Random, ControlKind::Shuffled, ControlKind::Orthogonal]
            .into_iter()
            .map(|k| control_vector(k, reference, self.control_seed, None))
            .collect()
    }

    fn style_ortho(&self, global: &[SteeringVector]) -> Result<Vec<SteeringVector>> {
        let curr: Vec<Vec<f64>> = self
            .bundle
            .mcvs()
            .filter(|m| m.role == Role::Curr)
            .map(|m| m.z.0)
            .collect();
        let basis = style_basis(&Matrix::from_columns(&curr)?, self.style_k)?;
        global
            .iter()
            .map(|v| control_vector(ControlKind::StyleOrtho, v, self.control_seed, Some(&basis)))
            .collect()
    }
}

fn forge<'a>(
    bundle: &'a ActivationBundle,
    pairs: &[PairedReport],
    dict: &'a CueDictionary,
    icv_k: &'a [usize],
    style_k: usize,
    control_seed: u64,
) -> Result<Forge<'a>> {
    let hist = history_pairs(pairs);
    if hist.is_empty() {
        return Err(Error::Pairing("corpus has no history-bearing pairs".into()));
    }
    Ok(Forge {
        bundle,
        table: bundle.to_table()?,
        hist,
        dict,
        icv_k,
        style_k,
        control_seed,
    })
}

/// Builds every family. Controls reference SDIV; style-orthogonalized
/// vectors start from each Global ICV.
pub fn forge_vectors(
    bundle: &ActivationBundle,
    pairs: &[PairedReport],
    dict: &CueDictionary,
    icv_k: &[usize],
    style_k: usize,
    control_seed: u64,
) -> Result<VectorSet> {
    let f = forge(bundle, pairs, dict, icv_k, style_k, control_seed)?;
    let global_icv = f.global_icv()?;
    let specific50 = f.specific50()?;
    let sdiv = f.sdiv()?;
    let controls = f.controls(&sdiv.vector)?;
    let style_ortho = f.style_ortho(&global_icv)?;
    Ok(VectorSet {
        global_icv,
        specific50,
        sdiv,
        controls,
        style_ortho,
    })
}

/// Builds only the requested families plus what they depend on, returning
/// the requested vectors in [`VectorFamily::ALL`] order.
pub fn forge_selected(
    bundle: &ActivationBundle,
    pairs: &[PairedReport],
    dict: &CueDictionary,
    families: &[VectorFamily],
    icv_k: &[usize],
    style_k: usize,
    control_seed: u64,
) -> Result<Vec<SteeringVector>> {
    let f = forge(bundle, pairs, dict, icv_k, style_k, control_seed)?;
    let want = |x| families.contains(&x);
    let global = if want(VectorFamily::GlobalIcv) || want(VectorFamily::StyleOrtho) {
        f.global_icv()?
    } else {
        Vec::new()
    };
    let sdiv = if want(VectorFamily::Sdiv) || want(VectorFamily::Controls) {
        Some(f.sdiv()?.vector)
    } else {
        None
    };
    let mut out = Vec::new();
    if want(VectorFamily::GlobalIcv) {
        out.extend(global.iter().cloned());
    }
    if want(VectorFamily::Specific50) {
        out.extend(f.specific50()?);
    }
    if let Some(s) = &sdiv {
        if want(VectorFamily::Sdiv) {
            out.push(s.clone());
        }
        if want(VectorFamily::Controls) {
            out.extend(f.controls(s)?);
        }
    }
    if want(VectorFamily::StyleOrtho) {
        out.extend(f.style_ortho(&global)?);
    }
    Ok(out)
}

/// Unsteered generations on the first `n` cases, ready for teacher forcing.
pub fn baseline_probes(model: &ToyModel, cases: &[EvalCase], n: usize, decode: &DecodeConfig) -> Result<Vec<ProbeInput>> {
    cases
        .par_iter()
        .take(n)
        .map(|c| {
            let enc = model.encode(&model.image(&c.image_id, &c.reference), None)?;
            let mut tokens = model.generate(&enc, None, decode)?.tokens;
            if tokens.last() == Some(&model.vocab().eos()) {
                tokens.pop();
            }
            Ok(ProbeInput {
                image_id: c.image_id.clone(),
                reference: c.reference.clone(),
                tokens,
            })
        })
        .collect()
}

/// Per-word emission entropies of unsteered generations on every case.
pub fn attention_probe(
    model: &ToyModel,
    cases: &[EvalCase],
    decode: &DecodeConfig,
    dict: &CueDictionary,
    lexicon: &LabelLexicon,
) -> Result<Vec<AttentionRecord>> {
    let decode = decode.with_detail(TraceDetail::Full);
    let per_case: Vec<Vec<AttentionRecord>> = cases
        .par_iter()
        .map(|c| {
            let enc = model.encode(&model.image(&c.image_id, &c.reference), None)?;
            let trace = model.generate(&enc, None, &decode)?;
            attention_records(&c.image_id, &trace, &trace.words(model), dict, lexicon)
        })
        .collect::<Result<_>>()?;
    Ok(per_case.into_iter().flatten().collect())
}

/// Artifacts of one end-to-end run.
pub struct PipelineRun {
    pub corpus: Corpus,
    pub model: ToyModel,
    pub train_report: TrainReport,
    pub bundle: ActivationBundle,
    pub vectors: VectorSet,
    pub swept: Vec<SteeringVector>,
    pub sweep: SweepResult,
    pub eval: EvalReport,
}

/// Generates, trains, extracts, forges, sweeps `swept(vectors)` and evaluates.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    swept: impl FnOnce(&VectorSet) -> Vec<SteeringVector>,
    workers: usize,
) -> Result<PipelineRun> {
    let dict = CueDictionary::standard();
    let corpus = gen_corpus(&cfg.corpus, &dict)?;
    let (model, train_report) = train_model(&corpus, &dict, &cfg.model, &cfg.train)?;
    let bundle = extract_bundle(&model, &corpus.pairs, None)?;
    let vectors = forge_vectors(&bundle, &corpus.pairs, &dict, &cfg.icv_k, cfg.style_k, cfg.control_seed)?;
    let swept = swept(&vectors);
    let sweep = run_sweep(&model, &cfg.sweep, &swept, &corpus.eval, workers)?;
    let judge = LogisticJudge::new(dict.clone());
    let eval = evaluate_sweep(
        &sweep.rows(),
        &corpus.eval,
        &dict,
        &cfg.corpus.lexicon()?,
        &judge,
        &cfg.eval,
    )?;
    Ok(PipelineRun {
        corpus,
        model,
        train_report,
        bundle,
        vectors,
        swept,
        sweep,
        eval,
    })
}
