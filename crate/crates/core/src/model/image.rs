// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic "images": deterministic feature grids derived from an image id
//! and the findings planted in its history-free report.
//!
//! Finding sentence `k` writes token patterns into a block of four encoder
//! slots (term, severity, location, label); remaining slots carry only noise.
//! Grounded tokens therefore have a specific slot to attend to, while cue
//! words have none.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::corpus::{LOCATIONS, PERIOD, SEVERITIES};
use crate::corpus::LABEL_TABLE;
use crate::linalg::Matrix;

const SLOTS_PER_FINDING: usize = 4;
const NOISE_SCALE: f64 = 0.1;

/// Stable 64-bit seed derived from a string.
pub fn string_seed(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

fn pattern(key: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(string_seed(&format!("pattern:{key}")));
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = crate::linalg::norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// One synthetic image: `image_tokens x d_model` features.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub image_id: String,
    pub features: Matrix,
}

impl SyntheticImage {
    /// Builds the feature grid for `image_id` from the findings in `reference`.
    pub fn from_reference(image_id: &str, reference: &[String], image_tokens: usize, d_model: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(string_seed(&format!("image:{image_id}")));
        let mut features = Matrix::zeros(image_tokens, d_model);
        for i in 0..image_tokens {
            for j in 0..d_model {
                let z: f64 = StandardNormal.sample(&mut rng);
                features[(i, j)] = NOISE_SCALE * z;
            }
        }
        for (k, sentence) in reference.split(|t| t == PERIOD).enumerate() {
            let base = k * SLOTS_PER_FINDING;
            if base + SLOTS_PER_FINDING > image_tokens {
                break;
            }
            let mut write = |slot: usize, key: &str| {
                let p = pattern(key, d_model);
                for (j, x) in p.iter().enumerate() {
                    features[(base + slot, j)] += x;
                }
            };
            for tok in sentence {
                if let Some(label) = LABEL_TABLE.iter().find(|(_, terms)| terms.contains(&tok.as_str())) {
                    write(0, tok);
                    write(3, label.0);
                } else if SEVERITIES.contains(&tok.as_str()) {
                    write(1, tok);
                } else if LOCATIONS.contains(&tok.as_str()) {
                    write(2, tok);
                }
            }
        }
        Self {
            image_id: image_id.to_string(),
            features,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn deterministic_and_content_dependent() {
        let r = tokenize("mild left effusion . small right opacity .");
        let a = SyntheticImage::from_reference("img-1", &r, 16, 8);
        let b = SyntheticImage::from_reference("img-1", &r, 16, 8);
        assert_eq!(a, b);
        let c = SyntheticImage::from_reference("img-2", &r, 16, 8);
        assert_ne!(a, c);
        let r2 = tokenize("mild left effusion .");
        let d = SyntheticImage::from_reference("img-1", &r2, 16, 8);
        assert_eq!(a.features.row(0), d.features.row(0));
        assert_ne!(a.features.row(4), d.features.row(4));
    }
}
