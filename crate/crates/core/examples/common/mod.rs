// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small corpus and briefly trained model shared by the examples.

#![allow(dead_code)]

use sdls::corpus::{gen_corpus, Corpus, CorpusConfig, CueDictionary};
use sdls::model::{ToyModel, ToyModelConfig, TrainConfig};
use sdls::pipeline::train_model;

pub fn small_corpus(dict: &CueDictionary) -> (CorpusConfig, Corpus) {
    let cfg = CorpusConfig {
        n_pairs: 600,
        n_eval: 40,
        ..CorpusConfig::default()
    };
    let corpus = gen_corpus(&cfg, dict).expect("corpus");
    (cfg, corpus)
}

pub fn small_model(corpus: &Corpus, dict: &CueDictionary, epochs: usize) -> ToyModel {
    let train = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let (model, report) = train_model(corpus, dict, &ToyModelConfig::default(), &train).expect("training");
    println!("trained {} steps, final loss {:.3}", report.steps, report.final_loss.unwrap_or(f64::NAN));
    model
}
