// SPDX-License-Identifier: MIT OR Apache-2.0

//! Build every steering-vector family from one bundle and compare them.
//!
//! ```text
//! cargo run --release --example forge
//! ```

mod common;

use sdls::corpus::CueDictionary;
use sdls::linalg::cosine;
use sdls::pipeline::{extract_bundle, forge_vectors};

fn main() -> sdls::Result<()> {
    let dict = CueDictionary::standard();
    let (_, corpus) = common::small_corpus(&dict);
    let model = common::small_model(&corpus, &dict, 2);
    let bundle = extract_bundle(&model, &corpus.pairs, None)?;
    let vs = forge_vectors(&bundle, &corpus.pairs, &dict, &[1, 3, 10], 5, 17)?;

    let s = &vs.sdiv;
    println!("sdiv classes: {:?}, dropped: {:?}", s.used, s.dropped);
    for (c, d) in &s.class_directions {
        println!("  {c:<12} cosine to sdiv {:+.3}", cosine(d, &s.vector.v));
    }
    for v in vs.all() {
        println!("{:<22} norm {:>9.4}  cosine to sdiv {:+.3}", v.name(), v.norm(), cosine(&v.v, &s.vector.v));
    }
    Ok(())
}
