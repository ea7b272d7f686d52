// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sweep outputs to per-case metrics and the operating-point table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, CueDictionary, EvalCase, LabelLexicon};
use crate::error::{Error, Result};
use crate::metrics::{
    bootstrap_statistic_ci, f1_from_labels, DecouplingRow, hsc, hsr, label_report, paired_bootstrap_ci, passes_selection,
    select_operating_point, Judge, MetricRow, OperatingPointRow, BOOTSTRAP_METHOD, DEFAULT_RESAMPLES,
};
use crate::steer::{SweepRow, BASELINE_CONDITION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Bootstrap resamples; 0 skips confidence intervals.
    pub resamples: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            alpha: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub mean_hsr: f64,
    pub mean_judge: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub judge: String,
    pub bootstrap_method: String,
    pub options: EvalOptions,
    pub baseline: BaselineSummary,
    pub operating_points: Vec<OperatingPointRow>,
    /// Condition id of the selected operating point.
    pub selected: Option<String>,
    #[serde(skip)]
    pub metric_rows: Vec<MetricRow>,
}

impl EvalReport {
    pub fn selected_row(&self) -> Option<&OperatingPointRow> {
        let id = self.selected.as_ref()?;
        self.operating_points.iter().find(|r| &r.condition == id)
    }

    pub fn row(&self, condition: &str) -> Option<&OperatingPointRow> {
        self.operating_points.iter().find(|r| r.condition == condition)
    }
}

/// Span rate of a generated report; an empty generation has no cue tokens.
fn generated_hsr(tokens: &[String], dict: &CueDictionary) -> Result<f64> {
    if tokens.is_empty() {
        Ok(0.0)
    } else {
        hsr(tokens, dict)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

struct Scored {
    hsr: Vec<f64>,
    judge: Vec<f64>,
    labels: Vec<Vec<bool>>,
}

/// Scores every sweep row against its reference and builds one operating
/// point per intervention condition, paired with the baseline on image id.
pub fn evaluate_sweep(
    rows: &[SweepRow],
    refs: &[EvalCase],
    dict: &CueDictionary,
    lexicon: &LabelLexicon,
    judge: &dyn Judge,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let ref_labels: HashMap<&str, Vec<bool>> = refs
        .iter()
        .map(|c| (c.image_id.as_str(), label_report(&c.reference, lexicon)))
        .collect();
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&SweepRow>> = HashMap::new();
    for r in rows {
        let g = groups.entry(r.condition.as_str()).or_insert_with(|| {
            order.push(r.condition.as_str());
            Vec::new()
        });
        g.push(r);
    }
    let base_rows = groups
        .get(BASELINE_CONDITION)
        .ok_or_else(|| Error::Pairing("sweep has no baseline rows".into()))?;
    let case_ids: Vec<&str> = base_rows.iter().map(|r| r.image_id.as_str()).collect();
    let refs_aligned: Vec<Vec<bool>> = case_ids
        .iter()
        .map(|id| {
            ref_labels
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Pairing(format!("no reference for {id}")))
        })
        .collect::<Result<_>>()?;

    let mut metric_rows = Vec::new();
    let mut score = |condition: &str, group: &[&SweepRow]| -> Result<Scored> {
        let by_id: HashMap<&str, &SweepRow> = group.iter().map(|r| (r.image_id.as_str(), *r)).collect();
        let mut s = Scored {
            hsr: Vec::new(),
            judge: Vec::new(),
            labels: Vec::new(),
        };
        for (id, lref) in case_ids.iter().zip(&refs_aligned) {
            let row = by_id
                .get(id)
                .ok_or_else(|| Error::Pairing(format!("condition {condition} has no row for {id}")))?;
            let toks = tokenize(&row.text);
            let h = generated_hsr(&toks, dict)?;
            let j = judge.prob(id, condition, &toks)?;
            let lp = label_report(&toks, lexicon);
            metric_rows.push(MetricRow {
                condition: condition.to_string(),
                image_id: id.to_string(),
                hsr: h,
                hsc: hsc(&toks, dict),
                tokens: toks.len(),
                judge_prob: j,
                labels_pred: lp.clone(),
                labels_ref: lref.clone(),
            });
            s.hsr.push(h);
            s.judge.push(j);
            s.labels.push(lp);
        }
        Ok(s)
    };

    let base = score(BASELINE_CONDITION, base_rows)?;
    let base_f1 = f1_from_labels(&base.labels, &refs_aligned)?;
    let baseline = BaselineSummary {
        mean_hsr: mean(&base.hsr),
        mean_judge: mean(&base.judge),
        macro_f1: base_f1.macro_f1,
        micro_f1: base_f1.micro_f1,
        cases: case_ids.len(),
    };

    let mut operating_points = Vec::new();
    for cond in order.iter().filter(|c| **c != BASELINE_CONDITION) {
        let group = &groups[cond];
        let s = score(cond, group)?;
        let f1 = f1_from_labels(&s.labels, &refs_aligned)?;
        let deltas: Vec<f64> = base.hsr.iter().zip(&s.hsr).map(|(b, m)| b - m).collect();
        let delta_hsr = baseline.mean_hsr - mean(&s.hsr);
        let (delta_hsr_ci, delta_f1_ci) = if opts.resamples > 0 {
            let hsr_ci = paired_bootstrap_ci(&deltas, opts.resamples, opts.alpha, opts.seed)?;
            let f1_ci = bootstrap_statistic_ci(case_ids.len(), opts.resamples, opts.alpha, opts.seed, |idx| {
                let pick = |v: &[Vec<bool>]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
                let r = pick(&refs_aligned);
                let m = f1_from_labels(&pick(&s.labels), &r).map(|x| x.macro_f1);
                let b = f1_from_labels(&pick(&base.labels), &r).map(|x| x.macro_f1);
                match (m, b) {
                    (Ok(m), Ok(b)) => m - b,
                    _ => f64::NAN,
                }
            })?;
            (Some(hsr_ci), Some(f1_ci))
        } else {
            (None, None)
        };
        let first = group[0];
        operating_points.push(OperatingPointRow {
            condition: cond.to_string(),
            strategy: first.strategy.clone(),
            vector: first.vector.clone(),
            lambda: first.lambda,
            mean_hsr: mean(&s.hsr),
            delta_hsr,
            delta_judge: baseline.mean_judge - mean(&s.judge),
            macro_f1: f1.macro_f1,
            micro_f1: f1.micro_f1,
            passes_selection: passes_selection(f1.macro_f1, baseline.macro_f1, delta_hsr),
            delta_hsr_ci,
            delta_f1_ci,
        });
    }
    let selected = select_operating_point(&operating_points).map(|r| r.condition.clone());
    Ok(EvalReport {
        judge: judge.name().to_string(),
        bootstrap_method: BOOTSTRAP_METHOD.into(),
        options: *opts,
        baseline,
        operating_points,
        selected,
        metric_rows,
    })
}

/// Per-case regression inputs: history-free probability against label
/// agreement with the reference, span rate and length.
pub fn decoupling_rows(rows: &[MetricRow]) -> Vec<DecouplingRow> {
    rows.iter()
        .map(|r| {
            let both = r.labels_pred.iter().zip(&r.labels_ref).filter(|(p, q)| **p && **q).count();
            let either = r.labels_pred.iter().zip(&r.labels_ref).filter(|(p, q)| **p || **q).count();
            DecouplingRow {
                history_free_prob: 1.0 - r.judge_prob,
                similarity: if either == 0 { 1.0 } else { both as f64 / either as f64 },
                hsr: r.hsr,
                length: r.tokens as f64,
            }
        })
        .collect()
}

/// Best row among those matching `filter`, ignoring the fidelity constraint:
/// largest ΔHSR, then macro F1, then smaller |λ|.
pub fn best_by_suppression<'a>(
    rows: &'a [OperatingPointRow],
    filter: impl Fn(&OperatingPointRow) -> bool,
) -> Option<&'a OperatingPointRow> {
    rows.iter().filter(|r| filter(r)).min_by(|a, b| {
        b.delta_hsr
            .total_cmp(&a.delta_hsr)
            .then(b.macro_f1.total_cmp(&a.macro_f1))
            .then(a.lambda.abs().total_cmp(&b.lambda.abs()))
            .then(a.condition.cmp(&b.condition))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LogisticJudge;

    fn row(cond: &str, id: &str, text: &str) -> SweepRow {
        SweepRow {
            condition: cond.into(),
            vector: if cond == BASELINE_CONDITION { String::new() } else { "sdiv".into() },
            strategy: String::new(),
            lambda: -0.1,
            image_id: id.into(),
            text: text.into(),
        }
    }

    fn case(id: &str, text: &str) -> EvalCase {
        EvalCase {
            image_id: id.into(),
            reference: tokenize(text),
            history_path: false,
        }
    }

    #[test]
    fn suppression_without_fidelity_loss_passes() {
        let dict = CueDictionary::standard();
        let lex = LabelLexicon::standard(14, 42).unwrap();
        let judge = LogisticJudge::new(dict.clone());
        let refs = [case("a", "small left effusion ."), case("b", "mild cardiomegaly .")];
        let rows = vec![
            row(BASELINE_CONDITION, "a", "stable small left effusion ."),
            row(BASELINE_CONDITION, "b", "mild cardiomegaly ."),
            row("c1", "a", "small left effusion ."),
            row("c1", "b", "mild cardiomegaly ."),
            row("c2", "a", "stable ."),
            row("c2", "b", ""),
        ];
        let opts = EvalOptions {
            resamples: 200,
            ..EvalOptions::default()
        };
        let rep = evaluate_sweep(&rows, &refs, &dict, &lex, &judge, &opts).unwrap();
        assert_eq!(rep.metric_rows.len(), 6);
        let c1 = rep.row("c1").unwrap();
        assert!(c1.delta_hsr > 0.0 && c1.passes_selection);
        assert!(c1.delta_judge > 0.0);
        let c2 = rep.row("c2").unwrap();
        assert!(!c2.passes_selection);
        assert_eq!(rep.selected.as_deref(), Some("c1"));
    }

    #[test]
    fn missing_case_is_a_pairing_error() {
        let dict = CueDictionary::standard();
        let lex = LabelLexicon::standard(14, 42).unwrap();
        let judge = LogisticJudge::new(dict.clone());
        let refs = [case("a", "small left effusion ."), case("b", "mild cardiomegaly .")];
        let rows = vec![
            row(BASELINE_CONDITION, "a", "small left effusion ."),
            row(BASELINE_CONDITION, "b", "mild cardiomegaly ."),
            row("c1", "a", "small left effusion ."),
        ];
        let opts = EvalOptions {
            resamples: 0,
            ..EvalOptions::default()
        };
        assert!(matches!(
            evaluate_sweep(&rows, &refs, &dict, &lex, &judge, &opts),
            Err(Error::Pairing(_))
        ));
    }
}
