// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{template_tokens, CueDictionary, FILLERS, LABEL_TABLE};
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

/// Token <-> id mapping. Ids 0..3 are `<pad>`, `<bos>`, `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Specials followed by every token the synthetic language can produce, sorted.
    pub fn standard(dict: &CueDictionary) -> Self {
        let mut words: Vec<String> = dict.all_tokens();
        words.extend(template_tokens());
        words.extend(FILLERS.iter().map(|s| s.to_string()));
        for (_, terms) in LABEL_TABLE {
            words.extend(terms.iter().map(|s| s.to_string()));
        }
        words.sort();
        words.dedup();
        let mut tokens = vec![PAD.to_string(), BOS.to_string(), EOS.to_string()];
        tokens.extend(words);
        Self::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn bos(&self) -> usize {
        1
    }

    pub fn eos(&self) -> usize {
        2
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| self.id(t).ok_or_else(|| Error::UnknownToken(t.clone())))
            .collect()
    }

    /// Decodes ids, dropping specials.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i > 2)
            .map(|&i| self.tokens[i].clone())
            .collect()
    }
}
