// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cue dictionary, tokenizer, and cue-span matching.
//!
//! Matching works on token sequences, never on raw strings:
//!
//! 1. every occurrence of a negative phrase (e.g. `no prior`) marks its tokens
//!    as excluded;
//! 2. a left-to-right scan takes, at each position, the longest cue phrase whose
//!    tokens are all un-excluded, then resumes after it.
//!
//! The covered token indices are the union of the accepted spans.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default dictionary shipped with the crate.
pub const DEFAULT_DICTIONARY_JSON: &str = include_str!("../../assets/cue_dictionary.json");

/// Temporal semantic category of a cue phrase. Ordering is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Stability,
    Comparison,
    Progression,
    Improvement,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Stability,
        Category::Comparison,
        Category::Progression,
        Category::Improvement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Stability => "stability",
            Category::Comparison => "comparison",
            Category::Progression => "progression",
            Category::Improvement => "improvement",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown category `{s}`")))
    }
}

/// Lowercases, splits on whitespace, and detaches trailing punctuation
/// (`.`, `,`, `;`, `:`) into separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        let trimmed = lower.trim_end_matches(['.', ',', ';', ':']);
        let tail = &lower[trimmed.len()..];
        if !trimmed.is_empty() {
            out.push(trimmed.to_string());
        }
        out.extend(tail.chars().map(|c| c.to_string()));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DictionaryFile {
    #[serde(default)]
    version: u32,
    categories: BTreeMap<Category, Vec<String>>,
    #[serde(default)]
    negatives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct Phrase {
    tokens: Vec<String>,
    category: Category,
}

/// One matched cue phrase in a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CueSpan {
    pub start: usize,
    pub len: usize,
    pub category: Category,
}

impl CueSpan {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Cue phrases grouped by category plus negative (exclusion) phrases.
#[derive(Debug, Clone)]
pub struct CueDictionary {
    file: DictionaryFile,
    // sorted by descending token length so the first hit is the longest
    phrases: Vec<Phrase>,
    negatives: Vec<Vec<String>>,
}

impl CueDictionary {
    /// The shipped default dictionary.
    pub fn standard() -> Self {
        Self::from_json(DEFAULT_DICTIONARY_JSON).expect("shipped cue dictionary is valid")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: DictionaryFile = serde_json::from_str(json)?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("dictionary serializes")
    }

    fn from_file(file: DictionaryFile) -> Result<Self> {
        let mut seen: BTreeMap<String, Category> = BTreeMap::new();
        let mut phrases = Vec::new();
        for (&category, list) in &file.categories {
            for p in list {
                let tokens = validate_phrase(p)?;
                if let Some(prev) = seen.insert(p.clone(), category) {
                    return Err(Error::InvalidArgument(format!(
                        "cue phrase `{p}` listed twice ({prev} and {category})"
                    )));
                }
                phrases.push(Phrase { tokens, category });
            }
        }
        if phrases.is_empty() {
            return Err(Error::InvalidArgument("dictionary has no cue phrases".into()));
        }
        // stable: equal lengths keep category/list order
        phrases.sort_by(|a, b| b.tokens.len().cmp(&a.tokens.len()));
        let mut negatives = Vec::new();
        for n in &file.negatives {
            negatives.push(validate_phrase(n)?);
        }
        Ok(Self {
            file,
            phrases,
            negatives,
        })
    }

    /// Phrases of one category, as written in the dictionary.
    pub fn phrases(&self, category: Category) -> &[String] {
        self.file
            .categories
            .get(&category)
            .map_or(&[], Vec::as_slice)
    }

    pub fn categories(&self) -> impl Iterator<Item = Category> + '_ {
        self.file.categories.keys().copied()
    }

    pub fn negatives(&self) -> &[String] {
        &self.file.negatives
    }

    /// Every distinct token appearing in a cue phrase.
    pub fn cue_tokens(&self) -> Vec<String> {
        let mut toks: Vec<String> = self
            .phrases
            .iter()
            .flat_map(|p| p.tokens.iter().cloned())
            .collect();
        toks.sort();
        toks.dedup();
        toks
    }

    /// Every token of every cue and negative phrase.
    pub fn all_tokens(&self) -> Vec<String> {
        let mut toks = self.cue_tokens();
        toks.extend(self.negatives.iter().flatten().cloned());
        toks.sort();
        toks.dedup();
        toks
    }

    /// Mask of tokens covered by any negative phrase.
    pub fn excluded_mask(&self, tokens: &[String]) -> Vec<bool> {
        let mut mask = vec![false; tokens.len()];
        for neg in &self.negatives {
            for start in 0..tokens.len() {
                if matches_at(tokens, start, neg) {
                    mask[start..start + neg.len()].fill(true);
                }
            }
        }
        mask
    }

    /// Leftmost-longest cue spans after negative-phrase exclusion.
    pub fn find_spans(&self, tokens: &[String]) -> Vec<CueSpan> {
        let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let excluded = self.excluded_mask(&lowered);
        let mut spans = Vec::new();
        let mut i = 0;
        while i < lowered.len() {
            let hit = self.phrases.iter().find(|p| {
                matches_at(&lowered, i, &p.tokens)
                    && !excluded[i..i + p.tokens.len()].iter().any(|&e| e)
            });
            match hit {
                Some(p) => {
                    spans.push(CueSpan {
                        start: i,
                        len: p.tokens.len(),
                        category: p.category,
                    });
                    i += p.tokens.len();
                }
                None => i += 1,
            }
        }
        spans
    }

    /// Mask of tokens covered by at least one cue span.
    pub fn covered_mask(&self, tokens: &[String]) -> Vec<bool> {
        let mut mask = vec![false; tokens.len()];
        for s in self.find_spans(tokens) {
            mask[s.start..s.end()].fill(true);
        }
        mask
    }

    pub fn contains_cue(&self, tokens: &[String]) -> bool {
        !self.find_spans(tokens).is_empty()
    }
}

fn matches_at(tokens: &[String], start: usize, phrase: &[String]) -> bool {
    start + phrase.len() <= tokens.len()
        && tokens[start..start + phrase.len()]
            .iter()
            .zip(phrase)
            .all(|(a, b)| a == b)
}

fn validate_phrase(p: &str) -> Result<Vec<String>> {
    if p.trim().is_empty() {
        return Err(Error::InvalidArgument("empty cue phrase".into()));
    }
    if p != p.to_lowercase() {
        return Err(Error::InvalidArgument(format!(
            "cue phrase `{p}` is not lowercase"
        )));
    }
    Ok(p.split_whitespace().map(str::to_string).collect())
}
