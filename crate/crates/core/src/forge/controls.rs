// SPDX-License-Identifier: MIT OR Apache-2.0

//! Negative-control and style-orthogonalized vectors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{SteeringVector, VectorKind};
use crate::error::{Error, Result};
use crate::linalg::{dot, l2_normalize, pca_top_k, project_out_subspace, Matrix, Vector, ZERO_NORM};

/// Default number of style directions removed by [`ControlKind::StyleOrtho`].
pub const STYLE_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Random,
    Shuffled,
    Orthogonal,
    StyleOrtho,
}

/// Principal directions of history-free multi-layer vectors (columns of `mcvs`).
pub fn style_basis(mcvs: &Matrix, k: usize) -> Result<Matrix> {
    let k = k.min(mcvs.rows()).min(mcvs.cols());
    if k == 0 {
        return Err(Error::Control("style basis needs samples".into()));
    }
    let centered = mcvs.centered(&mcvs.column_mean());
    Ok(pca_top_k(&centered, k)?.basis)
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn control_vector(
    kind: ControlKind,
    reference: &SteeringVector,
    seed: u64,
    style: Option<&Matrix>,
) -> Result<SteeringVector> {
    let dim = reference.v.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v, vk) = match kind {
        ControlKind::Random => (l2_normalize(&gaussian(&mut rng, dim))?, VectorKind::RandomControl),
        ControlKind::Shuffled => {
            let mut v = reference.v.0.clone();
            v.shuffle(&mut rng);
            (Vector(v), VectorKind::ShuffledControl)
        }
        ControlKind::Orthogonal => {
            if dim < 2 {
                return Err(Error::Control(
                    "no orthogonal direction exists in one dimension".into(),
                ));
            }
            let r = l2_normalize(&reference.v)?;
            let mut v = gaussian(&mut rng, dim);
            // Two passes of Gram-Schmidt keep the residual at rounding level.
            for _ in 0..2 {
                let c = dot(&v, &r);
                for (x, y) in v.iter_mut().zip(r.iter()) {
                    *x -= c * y;
                }
            }
            if crate::linalg::norm(&v) < ZERO_NORM {
                return Err(Error::Control("orthogonal start collapsed".into()));
            }
            (l2_normalize(&v)?, VectorKind::OrthogonalControl)
        }
        ControlKind::StyleOrtho => {
            let basis = style.ok_or_else(|| Error::Control("style_ortho needs a style basis".into()))?;
            (project_out_subspace(&reference.v, basis)?, VectorKind::StyleOrtho)
        }
    };
    let mut out = SteeringVector::new(vk, reference.geometry, v)?;
    out.provenance = reference.provenance.clone();
    out.provenance.seed = Some(seed);
    out.provenance.notes.push(format!("reference={}", reference.name()));
    Ok(out)
}
