// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dose-response of cue-token logits and cross-attention entropy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CueDictionary, LabelLexicon, FILLERS, LABEL_TABLE, LOCATIONS, PERIOD, SEVERITIES};
use crate::error::{Error, Result};
use crate::model::{GenerationTrace, ToyModel};
use crate::steer::InjectionPlan;

/// Cue-phrase tokens that the report language never uses outside a cue.
pub fn cue_probe_tokens(dict: &CueDictionary) -> Vec<String> {
    let shared: Vec<&str> = FILLERS
        .iter()
        .chain(SEVERITIES.iter())
        .chain(LOCATIONS.iter())
        .copied()
        .chain(LABEL_TABLE.iter().flat_map(|(_, t)| t.iter().copied()))
        .chain(std::iter::once(PERIOD))
        .collect();
    dict.cue_tokens()
        .into_iter()
        .filter(|t| !shared.contains(&t.as_str()))
        .collect()
}

/// A probe input: image plus the baseline continuation to teacher-force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInput {
    pub image_id: String,
    pub reference: Vec<String>,
    /// Generated ids, without `<eos>`.
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseResponsePoint {
    pub lambda: f64,
    pub mean_delta_logit: f64,
    /// Standard error across probe inputs.
    pub stderr: f64,
    pub probes: usize,
}

/// Mean cue-token logit change against the unsteered model on identical
/// teacher-forced prefixes, one point per strength in `lambdas`.
///
/// The strength of `plan` is replaced by each grid value.
pub fn delta_logit_curve(
    model: &ToyModel,
    plan: &InjectionPlan,
    lambdas: &[f64],
    cue_ids: &[usize],
    probes: &[ProbeInput],
) -> Result<Vec<DoseResponsePoint>> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probe inputs".into()));
    }
    if cue_ids.is_empty() {
        return Err(Error::InvalidArgument("no cue tokens".into()));
    }
    if let Some(&bad) = cue_ids.iter().find(|&&i| i >= model.config().vocab_size) {
        return Err(Error::UnknownToken(format!("id {bad}")));
    }
    let inputs: Vec<Vec<usize>> = probes
        .iter()
        .map(|p| {
            let mut ids = vec![model.vocab().bos()];
            ids.extend(p.tokens.iter().take(model.config().max_len - 1));
            ids
        })
        .collect();
    let base: Vec<Vec<Vec<f64>>> = probes
        .par_iter()
        .zip(&inputs)
        .map(|(p, ids)| {
            let enc = model.encode(&model.image(&p.image_id, &p.reference), None)?;
            Ok(model.teacher_force(&enc, ids, None, None)?.logits)
        })
        .collect::<Result<_>>()?;
    lambdas
        .iter()
        .map(|&lambda| {
            let mut plan = plan.clone();
            plan.lambda = lambda;
            let program = plan.program(model)?;
            let per_probe: Vec<f64> = probes
                .par_iter()
                .zip(&inputs)
                .zip(&base)
                .map(|((p, ids), b)| {
                    let enc = model.encode(&model.image(&p.image_id, &p.reference), Some(&program))?;
                    let l = model.teacher_force(&enc, ids, Some(&program), None)?.logits;
                    let mut sum = 0.0;
                    for (lt, bt) in l.iter().zip(b) {
                        for &w in cue_ids {
                            sum += lt[w] - bt[w];
                        }
                    }
                    Ok(sum / (l.len() * cue_ids.len()) as f64)
                })
                .collect::<Result<_>>()?;
            let n = per_probe.len() as f64;
            let m = per_probe.iter().sum::<f64>() / n;
            let var = if per_probe.len() > 1 {
                per_probe.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Ok(DoseResponsePoint {
                lambda,
                mean_delta_logit: m,
                stderr: (var / n).sqrt(),
                probes: per_probe.len(),
            })
        })
        .collect()
}

/// Shannon entropy in nats.
pub fn attention_entropy(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Entropy of the cross-attention that emitted each requested token,
/// averaged over layers and heads. Needs a full-detail trace.
pub fn attention_diffusion(trace: &GenerationTrace, positions: &[usize]) -> Result<Vec<f64>> {
    positions
        .iter()
        .map(|&t| {
            let step = trace.cross_attention.get(t).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "position {t} has no cross-attention record ({} recorded)",
                    trace.cross_attention.len()
                ))
            })?;
            let (mut sum, mut n) = (0.0, 0usize);
            for layer in step {
                for head in layer {
                    sum += attention_entropy(head);
                    n += 1;
                }
            }
            if n == 0 {
                return Err(Error::InvalidArgument(format!("position {t} has empty attention")));
            }
            Ok(sum / n as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmittedKind {
    Cue,
    Finding,
    Other,
}

/// Emission entropy of one generated word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub image_id: String,
    pub step: usize,
    pub token: String,
    pub kind: EmittedKind,
    pub entropy: f64,
}

/// One record per word of a full-detail trace. Cue-covered words are `Cue`;
/// uncovered label terms are `Finding`.
pub fn attention_records(
    image_id: &str,
    trace: &GenerationTrace,
    words: &[String],
    dict: &CueDictionary,
    lexicon: &LabelLexicon,
) -> Result<Vec<AttentionRecord>> {
    let covered = dict.covered_mask(words);
    // `words` drops `<eos>`, so word i was emitted at step i.
    let steps: Vec<usize> = (0..words.len()).collect();
    let entropy = attention_diffusion(trace, &steps)?;
    Ok(words
        .iter()
        .zip(entropy)
        .enumerate()
        .map(|(i, (w, e))| AttentionRecord {
            image_id: image_id.to_string(),
            step: i,
            token: w.clone(),
            kind: if covered[i] {
                EmittedKind::Cue
            } else if lexicon.label_of_term(w).is_some() {
                EmittedKind::Finding
            } else {
                EmittedKind::Other
            },
            entropy: e,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionContrast {
    pub cue_mean_entropy: f64,
    pub finding_mean_entropy: f64,
    pub cue_tokens: usize,
    pub finding_tokens: usize,
}

/// Mean emission entropy of cue-span tokens versus finding-term tokens.
pub fn contrast_from_records(records: &[AttentionRecord]) -> Result<AttentionContrast> {
    let of = |k| records.iter().filter(|r| r.kind == k).map(|r| r.entropy).collect::<Vec<_>>();
    let (cue, finding) = (of(EmittedKind::Cue), of(EmittedKind::Finding));
    if cue.is_empty() || finding.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "contrast needs both token kinds; found {} cue and {} finding tokens",
            cue.len(),
            finding.len()
        )));
    }
    let avg = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    Ok(AttentionContrast {
        cue_mean_entropy: avg(&cue),
        finding_mean_entropy: avg(&finding),
        cue_tokens: cue.len(),
        finding_tokens: finding.len(),
    })
}

pub fn attention_contrast(
    traces: &[(GenerationTrace, Vec<String>)],
    dict: &CueDictionary,
    lexicon: &LabelLexicon,
) -> Result<AttentionContrast> {
    let mut records = Vec::new();
    for (trace, words) in traces {
        records.extend(attention_records("", trace, words, dict, lexicon)?);
    }
    contrast_from_records(&records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::forge::{Geometry, SteeringVector, VectorKind};
    use crate::linalg::Vector;
    use crate::model::test_support::tiny_model;
    use crate::steer::Strategy;

    #[test]
    fn entropy_extremes() {
        let p = 7usize;
        let uniform = vec![1.0 / p as f64; p];
        assert!((attention_entropy(&uniform) - (p as f64).ln()).abs() < 1e-12);
        assert_eq!(attention_entropy(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn probe_tokens_exclude_shared_words() {
        let t = cue_probe_tokens(&CueDictionary::standard());
        assert!(t.contains(&"stable".to_string()));
        assert!(!t.contains(&"seen".to_string()));
    }

    #[test]
    fn zero_strength_is_exactly_zero() {
        let m = tiny_model(2);
        let g = Geometry {
            segments: m.config().n_segments(),
            d_model: m.config().d_model,
        };
        let v = SteeringVector::new(VectorKind::Sdiv, g, Vector((0..g.dim()).map(|i| (i as f64).sin() + 0.1).collect()))
            .unwrap();
        let r = tokenize("mild left effusion .");
        let probes = vec![ProbeInput {
            image_id: "p".into(),
            reference: r.clone(),
            tokens: m.vocab().encode(&r).unwrap(),
        }];
        let cue = vec![m.vocab().id("stable").unwrap()];
        for s in Strategy::ALL {
            let plan = InjectionPlan::new(s, 0.0, v.clone());
            let c = delta_logit_curve(&m, &plan, &[0.0, -0.3], &cue, &probes).unwrap();
            assert_eq!(c[0].mean_delta_logit, 0.0, "{s}");
            assert_ne!(c[1].mean_delta_logit, 0.0, "{s}");
        }
    }
}
