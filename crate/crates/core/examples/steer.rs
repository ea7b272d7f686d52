// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sweep injection strategies and strengths, score the generations and pick
//! an operating point.
//!
//! ```text
//! cargo run --release --example steer
//! ```

mod common;

use sdls::corpus::CueDictionary;
use sdls::evaluation::{evaluate_sweep, EvalOptions};
use sdls::metrics::LogisticJudge;
use sdls::pipeline::{extract_bundle, forge_selected, VectorFamily};
use sdls::steer::{run_sweep, Strategy, SweepSpec};

fn main() -> sdls::Result<()> {
    let dict = CueDictionary::standard();
    let (cfg, corpus) = common::small_corpus(&dict);
    let model = common::small_model(&corpus, &dict, 3);
    let bundle = extract_bundle(&model, &corpus.pairs, None)?;
    let vectors = forge_selected(&bundle, &corpus.pairs, &dict, &[VectorFamily::Sdiv, VectorFamily::Controls], &[1], 5, 17)?;

    let spec = SweepSpec {
        strategies: vec![Strategy::SteerfairAttentionOutput, Strategy::GentleInject],
        fine_grid: vec![-0.1, -0.3],
        gentle_grid: vec![-5.0],
        ..SweepSpec::default()
    };
    let sweep = run_sweep(&model, &spec, &vectors, &corpus.eval, 0)?;
    let report = evaluate_sweep(
        &sweep.rows(),
        &corpus.eval,
        &dict,
        &cfg.lexicon()?,
        &LogisticJudge::new(dict.clone()),
        &EvalOptions {
            resamples: 500,
            ..EvalOptions::default()
        },
    )?;
    let b = &report.baseline;
    println!("baseline  HSR {:.4}  macro-F1 {:.4}", b.mean_hsr, b.macro_f1);
    for r in &report.operating_points {
        println!(
            "{:<48} ΔHSR {:+.4} {:?}  macro-F1 {:.4}  pass {}",
            r.condition, r.delta_hsr, r.delta_hsr_ci, r.macro_f1, r.passes_selection
        );
    }
    match report.selected_row() {
        Some(r) => println!("selected {}", r.condition),
        None => println!("no condition improves suppression without losing fidelity"),
    }
    Ok(())
}
