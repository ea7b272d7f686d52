// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic synthetic corpus generator.
//!
//! Current (history-free) reports list one sentence per planted finding:
//! `<severity> <location> <term> .`. History reports add one to three cue
//! edits drawn from a semantic class. Progression edits are attached to
//! opacity findings with probability `entanglement`, which couples style
//! and content in the difference vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    classify_tokens, Category, Corpus, CorpusConfig, CueDictionary, EditClass, EvalCase,
    LabelLexicon, PairedReport, LOCATIONS, MINIMAL_SUBSET_SIZE, OPACITY_LABEL, PERIOD, SEVERITIES,
};
use crate::error::Result;

const EVAL_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Class prior for history reports.
const CLASS_WEIGHTS: [(Category, f64); 4] = [
    (Category::Stability, 0.45),
    (Category::Comparison, 0.20),
    (Category::Progression, 0.20),
    (Category::Improvement, 0.15),
];

const STABILITY_CLOSING: f64 = 0.7;
const STABILITY_CLOSINGS: [(&str, f64); 3] = [
    ("no interval change", 0.6),
    ("no change", 0.25),
    ("no significant change", 0.15),
];
const STABILITY_PREFIXES: [(&str, f64); 5] = [
    ("stable", 0.45),
    ("unchanged", 0.3),
    ("persistent", 0.1),
    ("chronic", 0.1),
    ("long-standing", 0.05),
];
const COMPARISON_OPENING: f64 = 0.5;
const COMPARISON_OPENINGS: [(&str, f64); 3] = [
    ("compared to the last study", 0.6),
    ("compared with the last study", 0.25),
    ("since the previous study", 0.15),
];
const COMPARISON_SUFFIX: &str = "again seen";
const PROGRESSION_PREFIXES: [(&str, f64); 6] = [
    ("increased", 0.5),
    ("worsened", 0.2),
    ("larger", 0.1),
    ("more", 0.1),
    ("development of", 0.05),
    ("now demonstrates", 0.05),
];
const IMPROVEMENT_PREFIXES: [(&str, f64); 5] = [
    ("improved", 0.4),
    ("decreased", 0.3),
    ("smaller", 0.1),
    ("less", 0.1),
    ("clearing of", 0.1),
];
const EXTRA_CUE_PROBS: [f64; 2] = [0.35, 0.15];
const EXTRA_SAME_CLASS: f64 = 0.6;
const FINDING_COUNT_WEIGHTS: [(usize, f64); 3] = [(1, 0.4), (2, 0.4), (3, 0.2)];

#[derive(Debug, Clone)]
struct Finding {
    label: usize,
    term: String,
    severity: &'static str,
    location: &'static str,
}

#[derive(Debug, Clone, Default)]
struct Sentence {
    prefix: Vec<String>,
    body: Vec<String>,
    suffix: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct Draft {
    opening: Option<Vec<String>>,
    sentences: Vec<Sentence>,
    closing: Option<Vec<String>>,
}

impl Draft {
    fn from_findings(findings: &[Finding]) -> Self {
        Self {
            opening: None,
            sentences: findings
                .iter()
                .map(|f| Sentence {
                    body: vec![f.severity.into(), f.location.into(), f.term.clone()],
                    ..Sentence::default()
                })
                .collect(),
            closing: None,
        }
    }

    fn render(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push_sentence = |toks: &[String]| {
            out.extend(toks.iter().cloned());
            out.push(PERIOD.to_string());
        };
        if let Some(o) = &self.opening {
            push_sentence(o);
        }
        for s in &self.sentences {
            let toks: Vec<String> = s
                .prefix
                .iter()
                .chain(&s.body)
                .chain(&s.suffix)
                .cloned()
                .collect();
            push_sentence(&toks);
        }
        if let Some(c) = &self.closing {
            push_sentence(c);
        }
        out
    }
}

fn words(phrase: &str) -> Vec<String> {
    phrase.split_whitespace().map(str::to_string).collect()
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, table: &'a [(T, f64)]) -> &'a T {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for (item, w) in table {
        if x < *w {
            return item;
        }
        x -= w;
    }
    &table[table.len() - 1].0
}

fn sample_findings(rng: &mut ChaCha8Rng, lex: &LabelLexicon) -> Vec<Finding> {
    let n = (*pick(rng, &FINDING_COUNT_WEIGHTS)).min(lex.len());
    let mut labels: Vec<usize> = Vec::with_capacity(n);
    while labels.len() < n {
        let l = rng.random_range(0..lex.len());
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    labels.sort_unstable();
    labels
        .into_iter()
        .map(|label| make_finding(rng, lex, label))
        .collect()
}

fn make_finding(rng: &mut ChaCha8Rng, lex: &LabelLexicon, label: usize) -> Finding {
    let terms = &lex.labels[label].terms;
    Finding {
        label,
        term: terms[rng.random_range(0..terms.len())].clone(),
        severity: SEVERITIES[rng.random_range(0..SEVERITIES.len())],
        location: LOCATIONS[rng.random_range(0..LOCATIONS.len())],
    }
}

/// Forces an opacity finding into the set, returning its sentence index.
fn plant_opacity(rng: &mut ChaCha8Rng, lex: &LabelLexicon, findings: &mut Vec<Finding>) -> Option<usize> {
    let opacity = lex.index_of(OPACITY_LABEL)?;
    if !findings.iter().any(|f| f.label == opacity) {
        let victim = rng.random_range(0..findings.len());
        findings.remove(victim);
        findings.push(make_finding(rng, lex, opacity));
        findings.sort_by_key(|f| f.label);
    }
    findings.iter().position(|f| f.label == opacity)
}

fn prefix_table(class: Category) -> &'static [(&'static str, f64)] {
    match class {
        Category::Stability => &STABILITY_PREFIXES,
        Category::Progression => &PROGRESSION_PREFIXES,
        Category::Improvement => &IMPROVEMENT_PREFIXES,
        Category::Comparison => &[],
    }
}

/// Every word the templates can emit.
pub fn template_tokens() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let tables: [&[(&str, f64)]; 6] = [
        &STABILITY_CLOSINGS,
        &STABILITY_PREFIXES,
        &COMPARISON_OPENINGS,
        &PROGRESSION_PREFIXES,
        &IMPROVEMENT_PREFIXES,
        &[(COMPARISON_SUFFIX, 1.0)],
    ];
    for t in tables {
        for (phrase, _) in t {
            out.extend(words(phrase));
        }
    }
    out.extend(SEVERITIES.iter().chain(LOCATIONS.iter()).map(|s| s.to_string()));
    out.push(PERIOD.to_string());
    out.sort();
    out.dedup();
    out
}

/// Applies the opening cue edit of `class`.
fn first_cue(rng: &mut ChaCha8Rng, draft: &mut Draft, class: Category, target: Option<usize>) {
    let n = draft.sentences.len();
    let at = target.unwrap_or_else(|| rng.random_range(0..n));
    match class {
        Category::Stability if rng.random::<f64>() < STABILITY_CLOSING => {
            draft.closing = Some(words(pick(rng, &STABILITY_CLOSINGS)));
        }
        Category::Comparison => {
            if rng.random::<f64>() < COMPARISON_OPENING {
                draft.opening = Some(words(pick(rng, &COMPARISON_OPENINGS)));
            } else {
                draft.sentences[at].suffix = words(COMPARISON_SUFFIX);
            }
        }
        _ => draft.sentences[at].prefix = words(pick(rng, prefix_table(class))),
    }
}

/// Adds a word-level cue to a sentence that has no edit of that kind yet.
fn extra_cue(rng: &mut ChaCha8Rng, draft: &mut Draft, class: Category) {
    let free: Vec<usize> = (0..draft.sentences.len())
        .filter(|&i| {
            let s = &draft.sentences[i];
            if class == Category::Comparison {
                s.suffix.is_empty()
            } else {
                s.prefix.is_empty()
            }
        })
        .collect();
    if free.is_empty() {
        return;
    }
    let at = free[rng.random_range(0..free.len())];
    if class == Category::Comparison {
        draft.sentences[at].suffix = words(COMPARISON_SUFFIX);
    } else {
        draft.sentences[at].prefix = words(pick(rng, prefix_table(class)));
    }
}

/// Single-word (or two-word for comparison) insertion for the curated subset.
fn minimal_cue(rng: &mut ChaCha8Rng, draft: &mut Draft, class: Category, target: Option<usize>) {
    let at = target.unwrap_or_else(|| rng.random_range(0..draft.sentences.len()));
    if class == Category::Comparison {
        draft.sentences[at].suffix = words(COMPARISON_SUFFIX);
        return;
    }
    let singles: Vec<(&str, f64)> = prefix_table(class)
        .iter()
        .copied()
        .filter(|(p, _)| !p.contains(' '))
        .collect();
    draft.sentences[at].prefix = words(pick(rng, &singles));
}

/// Generates the paired corpus and the held-out evaluation set.
pub fn gen_corpus(config: &CorpusConfig, dict: &CueDictionary) -> Result<Corpus> {
    config.validate()?;
    let lex = config.lexicon()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let n_pairs = if config.history_fraction > 0.0 {
        config.n_pairs
    } else {
        0
    };
    let stride = if config.minimal_subset && n_pairs >= MINIMAL_SUBSET_SIZE {
        Some(n_pairs / MINIMAL_SUBSET_SIZE)
    } else {
        None
    };

    let mut pairs = Vec::with_capacity(n_pairs);
    let mut minimal_count = 0;
    for i in 0..n_pairs {
        let mut findings = sample_findings(&mut rng, &lex);
        let class = *pick(&mut rng, &CLASS_WEIGHTS);
        let target = if class == Category::Progression && rng.random::<f64>() < config.entanglement {
            plant_opacity(&mut rng, &lex, &mut findings)
        } else {
            None
        };
        let draft = Draft::from_findings(&findings);
        let r_curr = draft.render();

        let is_minimal = stride.is_some_and(|s| i % s == 0) && minimal_count < MINIMAL_SUBSET_SIZE;
        let mut hist = draft.clone();
        if is_minimal {
            minimal_cue(&mut rng, &mut hist, class, target);
            minimal_count += 1;
        } else {
            first_cue(&mut rng, &mut hist, class, target);
            for p in EXTRA_CUE_PROBS {
                if rng.random::<f64>() < p {
                    let extra = if rng.random::<f64>() < EXTRA_SAME_CLASS {
                        class
                    } else {
                        Category::ALL[rng.random_range(0..4)]
                    };
                    extra_cue(&mut rng, &mut hist, extra);
                }
            }
        }
        let r_hist = hist.render();
        let semantic_class = Some(classify_tokens(&r_hist, dict)?);
        pairs.push(PairedReport {
            image_id: format!("img-{i:05}"),
            r_hist,
            r_curr,
            edit_class: if is_minimal {
                EditClass::Minimal
            } else {
                EditClass::General
            },
            semantic_class,
        });
    }

    let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed ^ EVAL_STREAM);
    let eval = (0..config.n_eval)
        .map(|i| {
            let findings = sample_findings(&mut eval_rng, &lex);
            let history_path = eval_rng.random::<f64>() < config.history_fraction;
            EvalCase {
                image_id: format!("eval-{i:05}"),
                reference: Draft::from_findings(&findings).render(),
                history_path,
            }
        })
        .collect();

    Ok(Corpus { pairs, eval })
}
