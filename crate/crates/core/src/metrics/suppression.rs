// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::corpus::{CueDictionary, PERIOD};
use crate::error::{Error, Result};

/// Fraction of tokens covered by cue spans, after negative-phrase exclusion.
pub fn hsr(tokens: &[String], dict: &CueDictionary) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::EmptyReport);
    }
    let covered = dict.covered_mask(tokens).iter().filter(|&&c| c).count();
    Ok(covered as f64 / tokens.len() as f64)
}

/// Number of period-delimited sentences holding at least one cue span.
pub fn hsc(tokens: &[String], dict: &CueDictionary) -> usize {
    let mut sentence_of = Vec::with_capacity(tokens.len());
    let mut s = 0;
    for t in tokens {
        sentence_of.push(s);
        if t == PERIOD {
            s += 1;
        }
    }
    let mut hit: Vec<usize> = dict
        .find_spans(tokens)
        .iter()
        .map(|span| sentence_of[span.start])
        .collect();
    hit.dedup();
    hit.len()
}

/// Mean rate of `baseline` minus mean rate of `method`; positive means suppression.
pub fn delta_hsr(baseline: &[f64], method: &[f64]) -> Result<f64> {
    if baseline.is_empty() || method.is_empty() {
        return Err(Error::EmptyReport);
    }
    Ok(mean(baseline) - mean(method))
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn d() -> CueDictionary {
        CueDictionary::standard()
    }

    #[test]
    fn stability_closing() {
        assert_eq!(hsr(&tokenize("no interval change noted ."), &d()).unwrap(), 0.6);
    }

    #[test]
    fn negatives_are_excluded() {
        assert_eq!(hsr(&tokenize("no prior studies available ."), &d()).unwrap(), 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(hsr(&[], &d()).is_err());
    }

    #[test]
    fn sentence_counts() {
        let dict = d();
        assert_eq!(hsc(&tokenize("stable mild effusion . small right opacity ."), &dict), 1);
        assert_eq!(hsc(&tokenize("small right opacity ."), &dict), 0);
        assert_eq!(
            hsc(&tokenize("stable effusion . increased opacity . no change ."), &dict),
            3
        );
    }

    #[test]
    fn delta_sign() {
        assert!((delta_hsr(&[0.0081], &[0.0046]).unwrap() - 0.0035).abs() < 1e-15);
        assert!(delta_hsr(&[0.1], &[0.2]).unwrap() < 0.0);
        assert_eq!(delta_hsr(&[0.1, 0.3], &[0.1, 0.3]).unwrap(), 0.0);
    }
}
