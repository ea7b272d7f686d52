// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generate a paired corpus, inspect a minimal pair and the class balance,
//! and write both JSONL files.
//!
//! ```text
//! cargo run --release --example corpus
//! ```

mod common;

use std::collections::BTreeMap;

use sdls::corpus::{assign_semantic_class, load_pairs, save_eval, save_pairs, CueDictionary};

fn main() -> sdls::Result<()> {
    let dict = CueDictionary::standard();
    let (cfg, corpus) = common::small_corpus(&dict);
    println!("{} pairs, {} eval cases, seed {}", corpus.pairs.len(), corpus.eval.len(), cfg.seed);

    let pair = corpus.minimal_pairs().next().expect("minimal pairs are generated");
    println!("hist: {}", pair.r_hist.join(" "));
    println!("curr: {}", pair.r_curr.join(" "));

    let mut classes = BTreeMap::new();
    for p in corpus.pairs.iter().filter(|p| p.r_hist != p.r_curr) {
        *classes.entry(assign_semantic_class(p, &dict)?).or_insert(0usize) += 1;
    }
    for (c, n) in &classes {
        println!("{c:<12} {n}");
    }

    let dir = std::env::temp_dir().join("sdls-corpus-example");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    save_pairs(&dir.join("pairs.jsonl"), &corpus.pairs)?;
    save_eval(&dir.join("eval.jsonl"), &corpus.eval)?;
    let back = load_pairs(&dir.join("pairs.jsonl"), &dict)?;
    assert_eq!(back, corpus.pairs);
    println!("wrote {}", dir.display());
    Ok(())
}
