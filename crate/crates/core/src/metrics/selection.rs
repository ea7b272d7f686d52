// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dual-objective operating-point table and selection rule.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Per-case metrics for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub condition: String,
    pub image_id: String,
    pub hsr: f64,
    pub hsc: usize,
    pub tokens: usize,
    pub judge_prob: f64,
    pub labels_pred: Vec<bool>,
    pub labels_ref: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointRow {
    pub condition: String,
    pub strategy: String,
    pub vector: String,
    pub lambda: f64,
    pub mean_hsr: f64,
    pub delta_hsr: f64,
    pub delta_judge: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub passes_selection: bool,
    pub delta_hsr_ci: Option<(f64, f64)>,
    pub delta_f1_ci: Option<(f64, f64)>,
}

/// Suppression improves and macro F1 does not fall below the baseline.
pub fn passes_selection(macro_f1: f64, baseline_macro_f1: f64, delta_hsr: f64) -> bool {
    macro_f1 >= baseline_macro_f1 && delta_hsr > 0.0
}

/// Preference order among passing rows: larger ΔHSR, then larger macro F1,
/// then smaller |λ|, then condition id.
fn prefer(a: &OperatingPointRow, b: &OperatingPointRow) -> Ordering {
    b.delta_hsr
        .total_cmp(&a.delta_hsr)
        .then(b.macro_f1.total_cmp(&a.macro_f1))
        .then(a.lambda.abs().total_cmp(&b.lambda.abs()))
        .then(a.condition.cmp(&b.condition))
}

pub fn select_operating_point(rows: &[OperatingPointRow]) -> Option<&OperatingPointRow> {
    rows.iter()
        .filter(|r| r.passes_selection)
        .min_by(|a, b| prefer(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, lambda: f64, dh: f64, f1: f64, pass: bool) -> OperatingPointRow {
        OperatingPointRow {
            condition: id.into(),
            strategy: "s".into(),
            vector: "v".into(),
            lambda,
            mean_hsr: 0.0,
            delta_hsr: dh,
            delta_judge: 0.0,
            macro_f1: f1,
            micro_f1: f1,
            passes_selection: pass,
            delta_hsr_ci: None,
            delta_f1_ci: None,
        }
    }

    #[test]
    fn none_when_nothing_passes() {
        assert!(select_operating_point(&[row("a", -0.1, 0.1, 0.5, false)]).is_none());
    }

    #[test]
    fn ties_resolve_by_f1_then_strength() {
        let rows = vec![
            row("a", -0.3, 0.02, 0.5, true),
            row("b", -0.2, 0.02, 0.5, true),
            row("c", -0.1, 0.02, 0.4, true),
            row("d", -0.5, 0.05, 0.6, false),
        ];
        assert_eq!(select_operating_point(&rows).unwrap().condition, "b");
    }

    #[test]
    fn predicate() {
        assert!(passes_selection(0.5, 0.5, 0.001));
        assert!(!passes_selection(0.49, 0.5, 0.1));
        assert!(!passes_selection(0.6, 0.5, 0.0));
    }
}
