// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cue-logit dose-response along the consensus vector and cross-attention
//! entropy of cue versus finding emissions.
//!
//! ```text
//! cargo run --release --example probe
//! ```

mod common;

use sdls::corpus::CueDictionary;
use sdls::metrics::{contrast_from_records, cue_probe_tokens, delta_logit_curve, spearman};
use sdls::model::DecodeConfig;
use sdls::pipeline::{attention_probe, baseline_probes, extract_bundle, forge_selected, VectorFamily};
use sdls::steer::{InjectionPlan, Strategy};

fn main() -> sdls::Result<()> {
    let dict = CueDictionary::standard();
    let (cfg, corpus) = common::small_corpus(&dict);
    let model = common::small_model(&corpus, &dict, 3);
    let bundle = extract_bundle(&model, &corpus.pairs, None)?;
    let sdiv = forge_selected(&bundle, &corpus.pairs, &dict, &[VectorFamily::Sdiv], &[1], 5, 17)?.remove(0);

    let decode = DecodeConfig::default();
    let probes = baseline_probes(&model, &corpus.eval, 20, &decode)?;
    let cue_ids: Vec<usize> = cue_probe_tokens(&dict).iter().filter_map(|w| model.vocab().id(w)).collect();
    let plan = InjectionPlan::new(Strategy::SteerfairAttentionOutput, 0.0, sdiv);
    let lambdas = [0.0, -0.1, -0.2, -0.3, -0.4, -0.5];
    let curve = delta_logit_curve(&model, &plan, &lambdas, &cue_ids, &probes)?;
    for p in &curve {
        println!("λ {:>5}  Δlogit {:+.4} ± {:.4}", p.lambda, p.mean_delta_logit, p.stderr);
    }
    let x: Vec<f64> = curve.iter().map(|p| p.lambda.abs()).collect();
    let y: Vec<f64> = curve.iter().map(|p| p.mean_delta_logit).collect();
    println!("spearman(|λ|, Δlogit) = {:.3}", spearman(&x, &y)?);

    let records = attention_probe(&model, &corpus.eval, &decode, &dict, &cfg.lexicon()?)?;
    match contrast_from_records(&records) {
        Ok(c) => println!(
            "entropy: cue {:.3} over {} tokens, finding {:.3} over {} tokens",
            c.cue_mean_entropy, c.cue_tokens, c.finding_mean_entropy, c.finding_tokens
        ),
        Err(e) => println!("no contrast: {e}"),
    }
    Ok(())
}
