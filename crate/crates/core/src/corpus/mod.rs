// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic paired-report corpus.
//!
//! Each pair holds a report written with historical comparison language
//! (`r_hist`) and its history-free counterpart (`r_curr`) for the same
//! synthetic image. A held-out evaluation set carries history-free references.

mod cues;
mod generate;
mod lexicon;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cues::{tokenize, Category, CueDictionary, CueSpan, DEFAULT_DICTIONARY_JSON};
pub use generate::{gen_corpus, template_tokens};
pub use lexicon::{Label, LabelLexicon, FILLERS, LABEL_TABLE, LOCATIONS, OPACITY_LABEL, PERIOD, SEVERITIES};

/// Number of minimal-edit pairs the curated subset holds.
pub const MINIMAL_SUBSET_SIZE: usize = 50;
/// Maximum token edit distance of a minimal-edit pair.
pub const MINIMAL_EDIT_DISTANCE: usize = 3;

/// A tokenized report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub image_id: String,
    pub tokens: Vec<String>,
}

impl Report {
    pub fn new(image_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            image_id: image_id.into(),
            tokens,
        }
    }

    pub fn from_text(image_id: impl Into<String>, text: &str) -> Self {
        Self::new(image_id, tokenize(text))
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditClass {
    Minimal,
    General,
}

/// With-history and history-free reports for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedReport {
    pub image_id: String,
    pub r_hist: Vec<String>,
    pub r_curr: Vec<String>,
    pub edit_class: EditClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_class: Option<Category>,
}

impl PairedReport {
    pub fn hist(&self) -> Report {
        Report::new(self.image_id.clone(), self.r_hist.clone())
    }

    pub fn curr(&self) -> Report {
        Report::new(self.image_id.clone(), self.r_curr.clone())
    }
}

/// Held-out evaluation case: a history-free reference report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub image_id: String,
    pub reference: Vec<String>,
    /// Whether the generator would have produced history language for this case.
    pub history_path: bool,
}

impl EvalCase {
    pub fn report(&self) -> Report {
        Report::new(self.image_id.clone(), self.reference.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_pairs: usize,
    pub n_eval: usize,
    pub history_fraction: f64,
    pub finding_lexicon_size: usize,
    pub label_set_size: usize,
    /// Probability that a progression-class pair is planted on an opacity finding.
    pub entanglement: f64,
    pub minimal_subset: bool,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_pairs: 5000,
            n_eval: 200,
            history_fraction: 0.76,
            finding_lexicon_size: 42,
            label_set_size: 14,
            entanglement: 0.8,
            minimal_subset: true,
            seed: 7,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.history_fraction) {
            return Err(Error::CorpusConfig("history_fraction must be in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.entanglement) {
            return Err(Error::CorpusConfig("entanglement must be in [0,1]".into()));
        }
        if self.label_set_size > self.finding_lexicon_size {
            return Err(Error::CorpusConfig(
                "label_set_size must not exceed finding_lexicon_size".into(),
            ));
        }
        if self.minimal_subset && self.history_fraction > 0.0 && self.n_pairs < MINIMAL_SUBSET_SIZE {
            return Err(Error::CorpusConfig(format!(
                "minimal subset needs n_pairs >= {MINIMAL_SUBSET_SIZE}, got {}",
                self.n_pairs
            )));
        }
        self.lexicon().map(|_| ())
    }

    pub fn lexicon(&self) -> Result<LabelLexicon> {
        LabelLexicon::standard(self.label_set_size, self.finding_lexicon_size)
    }
}

/// Paired training reports plus the held-out evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub pairs: Vec<PairedReport>,
    pub eval: Vec<EvalCase>,
}

impl Corpus {
    /// Pairs labeled `minimal`, in corpus order.
    pub fn minimal_pairs(&self) -> impl Iterator<Item = &PairedReport> {
        self.pairs
            .iter()
            .filter(|p| p.edit_class == EditClass::Minimal)
    }
}

/// Category of the longest cue phrase in `r_hist`; ties go to the earlier category.
pub fn assign_semantic_class(pair: &PairedReport, dict: &CueDictionary) -> Result<Category> {
    classify_tokens(&pair.r_hist, dict)
}

pub(crate) fn classify_tokens(tokens: &[String], dict: &CueDictionary) -> Result<Category> {
    dict.find_spans(tokens)
        .into_iter()
        .max_by(|a, b| a.len.cmp(&b.len).then(b.category.cmp(&a.category)))
        .map(|s| s.category)
        .ok_or(Error::Unclassifiable)
}

/// Token-level Levenshtein distance.
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

// ---------------------------------------------------------------------------
// JSONL I/O
// ---------------------------------------------------------------------------

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::CorpusParse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, item));
    }
    Ok(out)
}

pub fn save_pairs(path: &Path, pairs: &[PairedReport]) -> Result<()> {
    write_jsonl(path, pairs)
}

pub fn save_eval(path: &Path, eval: &[EvalCase]) -> Result<()> {
    write_jsonl(path, eval)
}

fn check_tokens(tokens: &[String], line: usize, invariant: &'static str) -> Result<()> {
    if tokens.is_empty() || tokens.iter().any(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
        return Err(Error::CorpusInvariant { line, invariant });
    }
    Ok(())
}

/// Checks every pair invariant; `line` is used for diagnostics.
pub fn validate_pair(pair: &PairedReport, dict: &CueDictionary, line: usize) -> Result<()> {
    if pair.image_id.is_empty() {
        return Err(Error::CorpusInvariant {
            line,
            invariant: "image_id non-empty",
        });
    }
    check_tokens(&pair.r_hist, line, "r_hist non-empty without whitespace tokens")?;
    check_tokens(&pair.r_curr, line, "r_curr non-empty without whitespace tokens")?;
    if pair.r_hist == pair.r_curr {
        return Err(Error::CorpusInvariant {
            line,
            invariant: "r_hist != r_curr",
        });
    }
    if dict.contains_cue(&pair.r_curr) {
        return Err(Error::CorpusInvariant {
            line,
            invariant: "r_curr contains no cue phrase",
        });
    }
    if pair.edit_class == EditClass::Minimal
        && edit_distance(&pair.r_hist, &pair.r_curr) > MINIMAL_EDIT_DISTANCE
    {
        return Err(Error::CorpusInvariant {
            line,
            invariant: "minimal pair edit distance <= 3",
        });
    }
    Ok(())
}

/// Loads and validates a pairs file.
pub fn load_pairs(path: &Path, dict: &CueDictionary) -> Result<Vec<PairedReport>> {
    let rows: Vec<(usize, PairedReport)> = read_jsonl(path)?;
    if rows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (line, pair) in &rows {
        validate_pair(pair, dict, *line)?;
    }
    Ok(rows.into_iter().map(|(_, p)| p).collect())
}

/// Loads an evaluation file; references must be cue-free.
pub fn load_eval(path: &Path, dict: &CueDictionary) -> Result<Vec<EvalCase>> {
    let rows: Vec<(usize, EvalCase)> = read_jsonl(path)?;
    if rows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (line, case) in &rows {
        check_tokens(&case.reference, *line, "reference non-empty without whitespace tokens")?;
        if dict.contains_cue(&case.reference) {
            return Err(Error::CorpusInvariant {
                line: *line,
                invariant: "reference contains no cue phrase",
            });
        }
    }
    Ok(rows.into_iter().map(|(_, c)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(hist: &str, curr: &str) -> PairedReport {
        PairedReport {
            image_id: "x".into(),
            r_hist: tokenize(hist),
            r_curr: tokenize(curr),
            edit_class: EditClass::General,
            semantic_class: None,
        }
    }

    #[test]
    fn class_of_stability_phrase() {
        let d = CueDictionary::standard();
        let p = pair("no interval change in mild effusion .", "mild effusion .");
        assert_eq!(assign_semantic_class(&p, &d).unwrap(), Category::Stability);
    }

    #[test]
    fn class_longest_phrase_beats_earlier_category() {
        let d = CueDictionary::standard();
        let p = pair("worsened opacity compared to film .", "opacity .");
        assert_eq!(assign_semantic_class(&p, &d).unwrap(), Category::Comparison);
    }

    #[test]
    fn class_tie_uses_category_order() {
        let d = CueDictionary::standard();
        let p = pair("improved opacity . stable effusion .", "opacity . effusion .");
        assert_eq!(assign_semantic_class(&p, &d).unwrap(), Category::Stability);
    }

    #[test]
    fn class_without_cue_is_error() {
        let d = CueDictionary::standard();
        let p = pair("mild effusion seen .", "mild effusion .");
        assert!(matches!(assign_semantic_class(&p, &d), Err(Error::Unclassifiable)));
    }

    #[test]
    fn levenshtein() {
        let a = tokenize("a b c");
        let b = tokenize("a x b c");
        assert_eq!(edit_distance(&a, &b), 1);
        assert_eq!(edit_distance(&a, &a), 0);
        assert_eq!(edit_distance(&a, &[]), 3);
    }

    #[test]
    fn validate_rejects_cue_in_curr() {
        let d = CueDictionary::standard();
        let p = pair("stable effusion .", "stable mild effusion .");
        assert!(matches!(
            validate_pair(&p, &d, 4),
            Err(Error::CorpusInvariant { line: 4, invariant: "r_curr contains no cue phrase" })
        ));
    }
}
