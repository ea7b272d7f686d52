// SPDX-License-Identifier: MIT OR Apache-2.0

//! Finding lexicon and label set of the synthetic report language.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label name and its surface terms, in label order.
pub const LABEL_TABLE: [(&str, [&str; 3]); 14] = [
    ("atelectasis", ["atelectasis", "collapse", "atelectatic"]),
    ("cardiomegaly", ["cardiomegaly", "enlargement", "cardiomyopathy"]),
    ("consolidation", ["consolidation", "consolidations", "airspace"]),
    ("edema", ["edema", "congestion", "vascular"]),
    ("enlarged_cardiomediastinum", ["widening", "mediastinum", "mediastinal"]),
    ("fracture", ["fracture", "fractures", "deformity"]),
    ("lung_lesion", ["nodule", "mass", "lesion"]),
    ("lung_opacity", ["opacity", "opacities", "haziness"]),
    ("pleural_effusion", ["effusion", "effusions", "fluid"]),
    ("pleural_other", ["thickening", "scarring", "calcification"]),
    ("pneumonia", ["pneumonia", "infection", "infiltrate"]),
    ("pneumothorax", ["pneumothorax", "pneumothoraces", "hydropneumothorax"]),
    ("support_devices", ["tube", "catheter", "pacemaker"]),
    ("emphysema", ["emphysema", "hyperinflation", "bullae"]),
];

/// Label whose findings co-occur with progression cues.
pub const OPACITY_LABEL: &str = "lung_opacity";

pub const SEVERITIES: [&str; 6] = ["mild", "moderate", "severe", "small", "minimal", "trace"];
pub const LOCATIONS: [&str; 7] = [
    "left",
    "right",
    "bilateral",
    "basilar",
    "upper",
    "lower",
    "retrocardiac",
];

/// Non-cue filler tokens used by report templates.
pub const FILLERS: [&str; 7] = ["study", "the", "of", "seen", "noted", "findings", ","];

pub const PERIOD: &str = ".";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    pub terms: Vec<String>,
}

/// Labels used by the toy fidelity labeler, each with its lexicon terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLexicon {
    pub labels: Vec<Label>,
}

impl LabelLexicon {
    /// First `label_set_size` labels; terms are handed out round-robin across
    /// labels until `finding_lexicon_size` terms are assigned.
    pub fn standard(label_set_size: usize, finding_lexicon_size: usize) -> Result<Self> {
        if label_set_size == 0 || label_set_size > LABEL_TABLE.len() {
            return Err(Error::CorpusConfig(format!(
                "label_set_size must be in 1..={}",
                LABEL_TABLE.len()
            )));
        }
        let max_terms = label_set_size * 3;
        if finding_lexicon_size < label_set_size || finding_lexicon_size > max_terms {
            return Err(Error::CorpusConfig(format!(
                "finding_lexicon_size must be in {label_set_size}..={max_terms}"
            )));
        }
        let mut labels: Vec<Label> = LABEL_TABLE[..label_set_size]
            .iter()
            .map(|(name, _)| Label {
                name: (*name).to_string(),
                terms: Vec::new(),
            })
            .collect();
        let mut assigned = 0;
        'outer: for round in 0..3 {
            for (i, (_, terms)) in LABEL_TABLE[..label_set_size].iter().enumerate() {
                if assigned == finding_lexicon_size {
                    break 'outer;
                }
                labels[i].terms.push(terms[round].to_string());
                assigned += 1;
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_of_term(&self, term: &str) -> Option<usize> {
        self.labels
            .iter()
            .position(|l| l.terms.iter().any(|t| t == term))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().flat_map(|l| l.terms.iter().map(String::as_str))
    }
}

impl Default for LabelLexicon {
    fn default() -> Self {
        Self::standard(14, 42).expect("default lexicon")
    }
}
