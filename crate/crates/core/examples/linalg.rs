// SPDX-License-Identifier: MIT OR Apache-2.0

//! The numerical core: PCA, Householder QR, subspace removal and the
//! norm-preserving update.
//!
//! ```text
//! cargo run --example linalg
//! ```

use sdls::linalg::{cosine, norm, pca_top_k, project_out_subspace, qr_orthonormal_basis, Matrix};
use sdls::model::norm_preserving_inject;

fn main() -> sdls::Result<()> {
    let samples = Matrix::from_columns(&[
        vec![2.0, 1.0, 0.1],
        vec![-2.0, -1.1, 0.0],
        vec![4.1, 2.0, -0.1],
        vec![-4.0, -1.9, 0.0],
    ])?;
    let pca = pca_top_k(&samples.centered(&samples.column_mean()), 2)?;
    println!("singular values {:?}", pca.singular_values);
    println!("first component {:?}", pca.components()[0]);

    let v = Matrix::from_columns(&[vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]])?;
    let qr = qr_orthonormal_basis(&v)?;
    println!("Q columns {:?}", qr.q.columns());
    println!("R diagonal [{:.4}, {:.4}]", qr.r[(0, 0)], qr.r[(1, 1)]);

    let x = [0.3, -0.2, 0.9];
    let rest = project_out_subspace(&x, &qr.q)?;
    println!("residual {:?}, cosine to span columns {:.2e}", rest.0, cosine(&rest, &qr.q.column(0)));

    let h = [3.0, 4.0, 0.0];
    let dir = [0.0, 0.0, 1.0];
    for lambda in [0.0, -0.1, -0.5, 0.5] {
        let out = norm_preserving_inject(&h, &dir, lambda)?;
        println!("λ {lambda:>4}: {out:.4?} norm {:.12}", norm(&out));
    }
    Ok(())
}
