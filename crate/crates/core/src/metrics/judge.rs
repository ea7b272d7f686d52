// SPDX-License-Identifier: MIT OR Apache-2.0

//! Report-level "mentions history" probability.

use std::collections::HashMap;
use std::path::Path;

use super::suppression::{hsc, hsr};
use crate::corpus::CueDictionary;
use crate::error::{Error, Result};

pub trait Judge: Sync {
    fn prob(&self, image_id: &str, condition: &str, tokens: &[String]) -> Result<f64>;

    fn name(&self) -> &str;
}

/// Logistic score over span rate, cued-sentence count and length.
///
/// Coefficients were fitted by hand on generated history and history-free
/// reports and are frozen.
#[derive(Debug, Clone)]
pub struct LogisticJudge {
    dict: CueDictionary,
    pub intercept: f64,
    pub w_hsr: f64,
    pub w_hsc: f64,
    pub w_len: f64,
}

impl LogisticJudge {
    pub const INTERCEPT: f64 = -3.5;
    pub const W_HSR: f64 = 12.0;
    pub const W_HSC: f64 = 1.5;
    pub const W_LEN: f64 = -0.02;

    pub fn new(dict: CueDictionary) -> Self {
        Self {
            dict,
            intercept: Self::INTERCEPT,
            w_hsr: Self::W_HSR,
            w_hsc: Self::W_HSC,
            w_len: Self::W_LEN,
        }
    }
}

impl Judge for LogisticJudge {
    fn prob(&self, _image_id: &str, _condition: &str, tokens: &[String]) -> Result<f64> {
        if tokens.is_empty() {
            return Ok(1.0 / (1.0 + (-self.intercept).exp()));
        }
        let z = self.intercept
            + self.w_hsr * hsr(tokens, &self.dict)?
            + self.w_hsc * hsc(tokens, &self.dict) as f64
            + self.w_len * tokens.len() as f64;
        Ok(1.0 / (1.0 + (-z).exp()))
    }

    fn name(&self) -> &str {
        "logistic"
    }
}

/// Scores supplied from outside, keyed by `(image_id, condition)`.
#[derive(Debug, Clone, Default)]
pub struct ExternalJudge {
    scores: HashMap<(String, String), f64>,
}

impl ExternalJudge {
    pub fn new(scores: HashMap<(String, String), f64>) -> Self {
        Self { scores }
    }

    /// Reads `image_id,condition,score` rows; a header row is optional.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scores = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "{}:{}: expected 3 columns",
                    path.display(),
                    i + 1
                )));
            }
            let score = match cols[2].parse::<f64>() {
                Ok(s) => s,
                Err(_) if i == 0 => continue,
                Err(_) => {
                    return Err(Error::InvalidArgument(format!(
                        "{}:{}: bad score {:?}",
                        path.display(),
                        i + 1,
                        cols[2]
                    )))
                }
            };
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::InvalidArgument(format!(
                    "{}:{}: score {score} outside [0, 1]",
                    path.display(),
                    i + 1
                )));
            }
            scores.insert((cols[0].to_string(), cols[1].to_string()), score);
        }
        Ok(Self { scores })
    }
}

impl Judge for ExternalJudge {
    fn prob(&self, image_id: &str, condition: &str, _tokens: &[String]) -> Result<f64> {
        self.scores
            .get(&(image_id.to_string(), condition.to_string()))
            .copied()
            .ok_or_else(|| {
                Error::InvalidArgument(format!("no external score for {image_id} / {condition}"))
            })
    }

    fn name(&self) -> &str {
        "external"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_corpus, tokenize, CorpusConfig};

    #[test]
    fn separates_generated_reports() {
        let dict = CueDictionary::standard();
        let j = LogisticJudge::new(dict.clone());
        let c = gen_corpus(
            &CorpusConfig {
                n_pairs: 200,
                n_eval: 10,
                ..CorpusConfig::default()
            },
            &dict,
        )
        .unwrap();
        for p in &c.pairs {
            assert!(j.prob("", "", &p.r_curr).unwrap() < 0.1);
        }
        assert!(j.prob("", "", &tokenize("no interval change .")).unwrap() > 0.9);
    }

    #[test]
    fn external_scores_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "image_id,condition,score\na,base,0.25\n").unwrap();
        let j = ExternalJudge::from_csv(&p).unwrap();
        assert_eq!(j.prob("a", "base", &[]).unwrap(), 0.25);
        assert!(j.prob("b", "base", &[]).is_err());
    }
}
