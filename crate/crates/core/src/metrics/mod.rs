// SPDX-License-Identifier: MIT OR Apache-2.0

//! Suppression and fidelity metrics, the selection rule, probes and statistics.

mod fidelity;
mod judge;
mod probe;
mod selection;
mod stats;
mod suppression;

pub use fidelity::{f1_from_labels, fidelity_f1, label_report, F1Scores, NEGATION_WINDOW};
pub use judge::{ExternalJudge, Judge, LogisticJudge};
pub use probe::{
    attention_contrast, attention_diffusion, attention_entropy, attention_records, contrast_from_records, cue_probe_tokens,
    delta_logit_curve, AttentionContrast, AttentionRecord, DoseResponsePoint, EmittedKind, ProbeInput,
};
pub use selection::{passes_selection, select_operating_point, MetricRow, OperatingPointRow};
pub use stats::{
    bootstrap_statistic_ci, ols, ols_decoupling, paired_bootstrap_ci, spearman, DecouplingRow, OlsFit,
    BOOTSTRAP_METHOD, DEFAULT_RESAMPLES,
};
pub use suppression::{delta_hsr, hsc, hsr};
