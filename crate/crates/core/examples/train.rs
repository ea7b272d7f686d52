// SPDX-License-Identifier: MIT OR Apache-2.0

//! Train the toy encoder-decoder briefly, save a checkpoint and reload it.
//!
//! ```text
//! cargo run --release --example train
//! ```

mod common;

use sdls::corpus::CueDictionary;
use sdls::model::{load_checkpoint, save_checkpoint, DecodeConfig};

fn main() -> sdls::Result<()> {
    let dict = CueDictionary::standard();
    let (_, corpus) = common::small_corpus(&dict);
    let model = common::small_model(&corpus, &dict, 3);
    println!("{} parameters", model.n_params());

    let path = std::env::temp_dir().join("sdls-example.ckpt");
    let sum = save_checkpoint(&model, &path, Some(serde_json::json!({"example": "train"})))?;
    let back = load_checkpoint(&path)?;
    assert_eq!(back.checksum(), model.checksum());
    println!("checkpoint {} sha256 {}", path.display(), &sum[..16]);

    for case in corpus.eval.iter().take(3) {
        let enc = model.encode(&model.image(&case.image_id, &case.reference), None)?;
        let out = model.generate(&enc, None, &DecodeConfig::default())?;
        println!("ref: {}", case.reference.join(" "));
        println!("gen: {}", out.words(&model).join(" "));
    }
    Ok(())
}
