// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rule-based finding labeler and label-level F1.

use serde::{Deserialize, Serialize};

use crate::corpus::LabelLexicon;
use crate::error::{Error, Result};

/// A term preceded by "no" within this many tokens is negated.
pub const NEGATION_WINDOW: usize = 3;

/// Binary label vector for one report.
pub fn label_report(tokens: &[String], lexicon: &LabelLexicon) -> Vec<bool> {
    let mut out = vec![false; lexicon.len()];
    for (i, t) in tokens.iter().enumerate() {
        let Some(label) = lexicon.label_of_term(t) else { continue };
        let lo = i.saturating_sub(NEGATION_WINDOW);
        if !tokens[lo..i].iter().any(|w| w == "no") {
            out[label] = true;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
    /// `None` for labels absent from every prediction and reference.
    pub per_label: Vec<Option<f64>>,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Macro and micro F1 of predicted against reference label vectors.
///
/// Labels never present on either side are left out of the macro mean.
pub fn f1_from_labels(pred: &[Vec<bool>], refs: &[Vec<bool>]) -> Result<F1Scores> {
    if pred.len() != refs.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} references",
            pred.len(),
            refs.len()
        )));
    }
    let n_labels = refs.first().or(pred.first()).map_or(0, Vec::len);
    let mut counts = vec![(0usize, 0usize, 0usize); n_labels];
    for (p, r) in pred.iter().zip(refs) {
        if p.len() != n_labels || r.len() != n_labels {
            return Err(Error::Shape("label vectors of unequal length".into()));
        }
        for l in 0..n_labels {
            match (p[l], r[l]) {
                (true, true) => counts[l].0 += 1,
                (true, false) => counts[l].1 += 1,
                (false, true) => counts[l].2 += 1,
                (false, false) => {}
            }
        }
    }
    let per_label: Vec<Option<f64>> = counts
        .iter()
        .map(|&(tp, fp, fn_)| (tp + fp + fn_ > 0).then(|| f1(tp, fp, fn_)))
        .collect();
    let present: Vec<f64> = per_label.iter().flatten().copied().collect();
    let macro_f1 = if present.is_empty() {
        1.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(F1Scores {
        macro_f1,
        micro_f1: f1(tp, fp, fn_),
        per_label,
    })
}

pub fn fidelity_f1(pred: &[Vec<String>], refs: &[Vec<String>], lexicon: &LabelLexicon) -> Result<F1Scores> {
    let p: Vec<Vec<bool>> = pred.iter().map(|t| label_report(t, lexicon)).collect();
    let r: Vec<Vec<bool>> = refs.iter().map(|t| label_report(t, lexicon)).collect();
    f1_from_labels(&p, &r)
}
