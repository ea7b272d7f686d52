// SPDX-License-Identifier: MIT OR Apache-2.0

//! Extract multi-layer vectors for every pair into an activation bundle and
//! round-trip it through disk.
//!
//! ```text
//! cargo run --release --example bundle
//! ```

mod common;

use sdls::bundle::{read_bundle, write_bundle};
use sdls::corpus::CueDictionary;
use sdls::pipeline::extract_bundle;

fn main() -> sdls::Result<()> {
    let dict = CueDictionary::standard();
    let (_, corpus) = common::small_corpus(&dict);
    let model = common::small_model(&corpus, &dict, 1);
    let bundle = extract_bundle(&model, &corpus.pairs, None)?;
    let g = bundle.geometry();
    println!("{} vectors of {} segments x {}", bundle.len(), g.segments, g.d_model);

    let path = std::env::temp_dir().join("sdls-example.sdlsb");
    let sum = write_bundle(&bundle, &path)?;
    let back = read_bundle(&path)?;
    assert_eq!(back, bundle);
    println!("{} checksum {}", path.display(), sum);

    let first = back.mcv(0);
    println!("{} ({}) first segment norm {:.3}", first.image_id, first.role, sdls::linalg::norm(g.segment(&first.z, 0)));
    Ok(())
}
