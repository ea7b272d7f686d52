// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance gate. Each test prints one `ACCEPTANCE <id> PASS|FAIL` line.
//!
//! Tests take a shared lock so that wall-clock budgets are measured without
//! contention from sibling tests.

mod common;

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use sdls::corpus::{tokenize, Category, CueDictionary};
use sdls::evaluation::best_by_suppression;
use sdls::forge::{sdiv, Geometry, SteeringVector};
use sdls::linalg::{pca_top_k, project_out_subspace, qr_orthonormal_basis, Matrix};
use sdls::metrics::{
    contrast_from_records, cue_probe_tokens, delta_logit_curve, hsc, hsr, ols, paired_bootstrap_ci, passes_selection,
    select_operating_point, spearman, OperatingPointRow,
};
use sdls::model::{norm_preserving_inject, DecodeConfig, ToyModel, ToyModelConfig, TraceDetail, Vocab};
use sdls::pipeline::{attention_probe, baseline_probes, run_pipeline, PipelineConfig, PipelineRun};
use sdls::steer::{HookedModel, InjectionPlan, Strategy, FINE_GRID};

const PCA_TOL: f64 = 1e-6;
const PCA_INSTANCES: usize = 50;
const QR_TOL: f64 = 1e-10;
const PROJECT_TOL: f64 = 1e-10;
const NUMERIC_BUDGET: Duration = Duration::from_secs(10);

const NORM_TOL: f64 = 1e-9;
const HOOKED_STATES: usize = 1000;

const SDIV_SEEDS: u64 = 100;
const SDIV_COSINE: f64 = 0.99;
const SDIV_REQUIRED: usize = 99;
const SDIV_BUDGET: Duration = Duration::from_secs(30);

const BASELINE_HSR_MIN: f64 = 0.02;
const F1_SLACK: f64 = 0.01;
const CONTROL_MAX_DELTA: f64 = 0.005;
const TOY_BUDGET: Duration = Duration::from_secs(300);

const RHO_MAX: f64 = -0.9;
const DOSE_PROBES: usize = 100;

const COVERAGE_TRIALS: usize = 200;
const COVERAGE_LO: f64 = 0.93;
const COVERAGE_HI: f64 = 0.97;
const COVERAGE_N: usize = 100;
const COVERAGE_RESAMPLES: usize = 2000;
const OLS_TOL: f64 = 1e-8;

const SELECTION_TABLES: usize = 100;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: &str, pass: bool, detail: String) {
    println!("ACCEPTANCE {id:<20} {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id}: {detail}");
}

// ---------------------------------------------------------------------------
// Trained toy model, shared by the reproduction, dose-response and attention
// criteria.
// ---------------------------------------------------------------------------

struct Toy {
    run: PipelineRun,
    elapsed: Duration,
}

static TOY: OnceLock<Toy> = OnceLock::new();

fn toy() -> &'static Toy {
    TOY.get_or_init(|| {
        let start = Instant::now();
        let run = run_pipeline(
            &PipelineConfig::default(),
            |vs| {
                let mut v = vec![vs.sdiv.vector.clone()];
                v.extend(vs.global_icv.iter().cloned());
                v.extend(vs.controls.iter().cloned());
                v
            },
            0,
        )
        .expect("default pipeline runs");
        Toy {
            run,
            elapsed: start.elapsed(),
        }
    })
}

fn attention_rows(rows: &[OperatingPointRow], vector: &str) -> Vec<OperatingPointRow> {
    let strategy = Strategy::SteerfairAttentionOutput.as_str();
    rows.iter()
        .filter(|r| r.vector == vector && r.strategy == strategy)
        .cloned()
        .collect()
}

/// Operating point of one vector: the selection rule when any strength
/// passes it, otherwise the strongest suppression.
fn best_lambda(rows: &[OperatingPointRow]) -> Option<OperatingPointRow> {
    select_operating_point(rows)
        .or_else(|| best_by_suppression(rows, |_| true))
        .cloned()
}

// ---------------------------------------------------------------------------

#[test]
fn numerical_core() {
    let _g = serial();
    let start = Instant::now();
    let mut r = rng(11);
    let mut pca_err: f64 = 0.0;
    for _ in 0..PCA_INSTANCES {
        let dim = r.random_range(4..24);
        let n = r.random_range(3..30);
        let raw = gaussian_matrix(&mut r, dim, n);
        let centered = center_columns(&raw);
        let max_k = dim.min(n - 1);
        let k = r.random_range(1..=max_k);
        let basis = pca_top_k(&to_matrix(&centered), k).unwrap();
        let (_, vecs) = jacobi_eigen(&gram_rows(&centered));
        let oracle = projector(&vecs[..k], dim);
        let got = projector(&basis.components(), dim);
        pca_err = pca_err.max(max_abs_diff(&oracle, &got));
    }
    let mut qr_orth: f64 = 0.0;
    let mut qr_recon: f64 = 0.0;
    let mut idem: f64 = 0.0;
    for _ in 0..PCA_INSTANCES {
        let dim = r.random_range(4..40);
        let c = r.random_range(1..=dim.min(8));
        let cols: Vec<Vec<f64>> = (0..c).map(|_| gaussian(&mut r, dim)).collect();
        let v = Matrix::from_columns(&cols).unwrap();
        let qr = qr_orthonormal_basis(&v).unwrap();
        let qtq = qr.q.t_matmul(&qr.q).unwrap();
        qr_orth = qr_orth.max(qtq.max_abs_diff(&Matrix::identity(c)));
        qr_recon = qr_recon.max(qr.q.matmul(&qr.r).unwrap().max_abs_diff(&v));
        let x = gaussian(&mut r, dim);
        let once = project_out_subspace(&x, &qr.q).unwrap();
        let twice = project_out_subspace(&once, &qr.q).unwrap();
        idem = idem.max(once.iter().zip(twice.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let elapsed = start.elapsed();
    let pass = pca_err < PCA_TOL && qr_orth < QR_TOL && qr_recon < QR_TOL && idem < PROJECT_TOL && elapsed < NUMERIC_BUDGET;
    verdict(
        "numerical_core",
        pass,
        format!(
            "pca {pca_err:.1e} (<{PCA_TOL:.0e}) qr_orth {qr_orth:.1e} qr_recon {qr_recon:.1e} (<{QR_TOL:.0e}) \
             idempotence {idem:.1e} (<{PROJECT_TOL:.0e}) time {:.2}s (<{}s)",
            elapsed.as_secs_f64(),
            NUMERIC_BUDGET.as_secs()
        ),
    );
}

#[test]
fn norm_preserving_contract() {
    let _g = serial();
    let dict = CueDictionary::standard();
    let model = ToyModel::init(
        ToyModelConfig {
            seed: 5,
            ..ToyModelConfig::default()
        },
        Vocab::standard(&dict),
    )
    .unwrap();
    let g = Geometry {
        segments: model.config().n_segments(),
        d_model: model.config().d_model,
    };
    let mut r = rng(23);
    let v = SteeringVector::new(sdls::forge::VectorKind::Sdiv, g, sdls::linalg::Vector(unit(&gaussian(&mut r, g.dim())))).unwrap();
    let decode = DecodeConfig::greedy().with_detail(TraceDetail::Full);
    let norm_strategies = [
        Strategy::GlobalInjection,
        Strategy::SteerfairLayerOutput,
        Strategy::SteerfairAttentionOutput,
    ];
    let mut states = 0usize;
    let mut worst: f64 = 0.0;
    let mut case = 0usize;
    while states < HOOKED_STATES {
        let id = format!("img{case}");
        let reference = tokenize(if case % 2 == 0 { "mild left effusion ." } else { "small right opacity ." });
        for s in norm_strategies {
            for lambda in [-0.5, -0.1, 0.3, 2.0] {
                let mut hooked = HookedModel::new(&model);
                hooked.apply(InjectionPlan::new(s, lambda, v.clone())).unwrap();
                let trace = hooked.generate(&id, &reference, &decode).unwrap();
                for rec in &trace.site_states {
                    worst = worst.max((rec.post_norm - rec.pre_norm).abs());
                    states += 1;
                }
            }
        }
        case += 1;
    }
    // Direct check on random states with the norm computed independently.
    for _ in 0..HOOKED_STATES {
        let h: Vec<f64> = gaussian(&mut r, 32).iter().map(|x| x * 7.0).collect();
        let dir = unit(&gaussian(&mut r, 32));
        let lambda = r.random_range(-2.0..2.0);
        let out = norm_preserving_inject(&h, &dir, lambda).unwrap();
        worst = worst.max((norm(&out) - norm(&h)).abs());
        states += 1;
    }
    let mut identical = true;
    for s in Strategy::ALL {
        for i in 0..5 {
            let id = format!("zero{i}");
            let reference = tokenize("stable mild effusion .");
            let base = HookedModel::new(&model).generate(&id, &reference, &decode).unwrap();
            let mut hooked = HookedModel::new(&model);
            hooked.apply(InjectionPlan::new(s, 0.0, v.clone())).unwrap();
            let steered = hooked.generate(&id, &reference, &decode).unwrap();
            identical &= base.tokens == steered.tokens
                && base.step_logits.len() == steered.step_logits.len()
                && base
                    .step_logits
                    .iter()
                    .flatten()
                    .zip(steered.step_logits.iter().flatten())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
        }
    }
    verdict(
        "norm_preservation",
        worst < NORM_TOL && states >= 2 * HOOKED_STATES && identical,
        format!("max |Δnorm| {worst:.2e} (<{NORM_TOL:.0e}) over {states} states; λ=0 bit-identical: {identical}"),
    );
}

#[test]
fn sdiv_planted_recovery() {
    let _g = serial();
    let start = Instant::now();
    let g = Geometry { segments: 3, d_model: 16 };
    let mut cosines = Vec::new();
    for seed in 0..SDIV_SEEDS {
        let planted = planted_style(seed, g.dim(), 24, 0.01);
        let out = sdiv(&planted.classed, g).unwrap();
        assert_eq!(out.used.len(), Category::ALL.len());
        cosines.push(dot(&out.vector.v, &planted.style) / norm(&out.vector.v));
    }
    let elapsed = start.elapsed();
    let hits = cosines.iter().filter(|&&c| c > SDIV_COSINE).count();
    let mut sorted = cosines.clone();
    sorted.sort_by(f64::total_cmp);
    verdict(
        "sdiv_recovery",
        hits >= SDIV_REQUIRED && elapsed < SDIV_BUDGET,
        format!(
            "{hits}/{SDIV_SEEDS} seeds with cosine > {SDIV_COSINE} (need {SDIV_REQUIRED}); cosine min {:.3} median {:.3} max {:.3}; time {:.2}s (<{}s)",
            sorted[0],
            sorted[sorted.len() / 2],
            sorted[sorted.len() - 1],
            elapsed.as_secs_f64(),
            SDIV_BUDGET.as_secs()
        ),
    );
}

#[derive(serde::Deserialize)]
struct GoldenCase {
    text: String,
    spans: Vec<(usize, usize, Category)>,
    hsr: Option<(usize, usize)>,
    hsc: usize,
}

#[test]
fn hsr_golden_file() {
    let _g = serial();
    let dict = CueDictionary::standard();
    let cases: Vec<GoldenCase> =
        serde_json::from_str(include_str!("data/hsr_golden.json")).expect("golden file parses");
    let mut mismatches = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut negatives = 0;
    let mut empty = 0;
    for (i, c) in cases.iter().enumerate() {
        let tokens = tokenize(&c.text);
        let spans: Vec<(usize, usize, Category)> =
            dict.find_spans(&tokens).iter().map(|s| (s.start, s.len, s.category)).collect();
        seen.extend(spans.iter().map(|s| s.2));
        if tokens.is_empty() {
            empty += 1;
        }
        if dict.excluded_mask(&tokens).iter().any(|&e| e) {
            negatives += 1;
        }
        let got = hsr(&tokens, &dict).ok();
        let want = c.hsr.map(|(n, d)| n as f64 / d as f64);
        if spans != c.spans || got != want || hsc(&tokens, &dict) != c.hsc {
            mismatches.push(format!("#{i} {:?}", c.text));
        }
    }
    let covers = seen.len() == Category::ALL.len() && negatives >= 3 && empty >= 2;
    verdict(
        "hsr_golden",
        cases.len() >= 30 && mismatches.is_empty() && covers,
        format!(
            "{} cases, {} mismatches {:?}; categories {}/{}, negative-phrase cases {negatives}, empty cases {empty}",
            cases.len(),
            mismatches.len(),
            mismatches,
            seen.len(),
            Category::ALL.len()
        ),
    );
}

#[test]
fn toy_reproduction() {
    let _g = serial();
    let t = toy();
    let eval = &t.run.eval;
    let base = &eval.baseline;
    let sdiv_name = t.run.vectors.sdiv.vector.name();
    let sdiv_op = best_lambda(&attention_rows(&eval.operating_points, &sdiv_name));
    let icv_rows: Vec<OperatingPointRow> = t
        .run
        .vectors
        .global_icv
        .iter()
        .flat_map(|v| attention_rows(&eval.operating_points, &v.name()))
        .collect();
    let icv_op = best_lambda(&icv_rows);

    let a = base.mean_hsr > BASELINE_HSR_MIN;
    let (b, c, d, detail_bcd) = match (&sdiv_op, &icv_op) {
        (Some(s), Some(g)) => {
            let b = s.delta_hsr > 0.0 && s.macro_f1 >= base.macro_f1 - F1_SLACK;
            let c = g.macro_f1 < s.macro_f1;
            let controls: Vec<(String, f64)> = t
                .run
                .vectors
                .controls
                .iter()
                .map(|v| {
                    let row = attention_rows(&eval.operating_points, &v.name())
                        .into_iter()
                        .find(|r| r.lambda == s.lambda)
                        .expect("control swept at the same strengths");
                    (v.name(), row.delta_hsr)
                })
                .collect();
            let d = controls.iter().all(|(_, dh)| dh.abs() < CONTROL_MAX_DELTA);
            (
                b,
                c,
                d,
                format!(
                    "(b) sdiv λ={} ΔHSR {:+.4} F1 {:.4} (≥ {:.4}) [{}]; (c) global_icv {} F1 {:.4} < {:.4} [{}]; (d) controls at λ={} {} (|·|<{CONTROL_MAX_DELTA}) [{}]",
                    s.lambda,
                    s.delta_hsr,
                    s.macro_f1,
                    base.macro_f1 - F1_SLACK,
                    pf(b),
                    g.condition,
                    g.macro_f1,
                    s.macro_f1,
                    pf(c),
                    s.lambda,
                    controls.iter().map(|(n, dh)| format!("{n} {dh:+.4}")).collect::<Vec<_>>().join(", "),
                    pf(d)
                ),
            )
        }
        _ => (false, false, false, "no operating points".to_string()),
    };
    let fast = t.elapsed < TOY_BUDGET;
    verdict(
        "toy_reproduction",
        a && b && c && d && fast,
        format!(
            "(a) baseline HSR {:.4} (>{BASELINE_HSR_MIN}) [{}]; {detail_bcd}; runtime {:.0}s (<{}s) [{}]",
            base.mean_hsr,
            pf(a),
            t.elapsed.as_secs_f64(),
            TOY_BUDGET.as_secs(),
            pf(fast)
        ),
    );
}

fn pf(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "fail"
    }
}

#[test]
fn dose_response() {
    let _g = serial();
    let t = toy();
    let model = &t.run.model;
    let dict = CueDictionary::standard();
    let cue_ids: Vec<usize> = cue_probe_tokens(&dict)
        .iter()
        .filter_map(|w| model.vocab().id(w))
        .collect();
    let probes = baseline_probes(model, &t.run.corpus.eval, DOSE_PROBES, &DecodeConfig::default()).unwrap();
    let plan = InjectionPlan::new(Strategy::SteerfairAttentionOutput, 0.0, t.run.vectors.sdiv.vector.clone());
    let mut lambdas = vec![0.0];
    lambdas.extend(FINE_GRID);
    let curve = delta_logit_curve(model, &plan, &lambdas, &cue_ids, &probes).unwrap();
    let zero = curve[0].mean_delta_logit;
    let fine = &curve[1..];
    let abs_l: Vec<f64> = fine.iter().map(|p| p.lambda.abs()).collect();
    let dl: Vec<f64> = fine.iter().map(|p| p.mean_delta_logit).collect();
    let rho = spearman(&abs_l, &dl).unwrap();
    verdict(
        "dose_response",
        rho <= RHO_MAX && zero == 0.0,
        format!(
            "spearman {rho:.3} (≤ {RHO_MAX}); Δlogit(0) = {zero:e}; curve {}",
            fine.iter()
                .map(|p| format!("{}:{:+.4}", p.lambda, p.mean_delta_logit))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
}

#[test]
fn attention_probe_direction() {
    let _g = serial();
    let t = toy();
    let dict = CueDictionary::standard();
    let lexicon = PipelineConfig::default().corpus.lexicon().unwrap();
    let records = attention_probe(&t.run.model, &t.run.corpus.eval, &DecodeConfig::default(), &dict, &lexicon).unwrap();
    let c = contrast_from_records(&records).unwrap();
    verdict(
        "attention_probe",
        c.cue_mean_entropy > c.finding_mean_entropy,
        format!(
            "cue entropy {:.4} ({} tokens) > finding entropy {:.4} ({} tokens)",
            c.cue_mean_entropy, c.cue_tokens, c.finding_mean_entropy, c.finding_tokens
        ),
    );
}

#[test]
fn bootstrap_coverage_and_ols() {
    let _g = serial();
    let true_mean = 0.25;
    let mut covered = 0usize;
    for trial in 0..COVERAGE_TRIALS {
        let mut r = rng(10_000 + trial as u64);
        let d: Vec<f64> = gaussian(&mut r, COVERAGE_N).iter().map(|x| true_mean + x).collect();
        let (lo, hi) = paired_bootstrap_ci(&d, COVERAGE_RESAMPLES, 0.05, trial as u64).unwrap();
        if lo <= true_mean && true_mean <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / COVERAGE_TRIALS as f64;

    let mut r = rng(77);
    let mut ols_err: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(20..200);
        let p = r.random_range(1..5);
        let xs: Vec<Vec<f64>> = (0..p).map(|_| gaussian(&mut r, n)).collect();
        let noise = gaussian(&mut r, n);
        let y: Vec<f64> = (0..n)
            .map(|i| 0.5 + xs.iter().enumerate().map(|(j, x)| (j as f64 - 1.0) * x[i]).sum::<f64>() + 0.3 * noise[i])
            .collect();
        let named: Vec<(String, Vec<f64>)> = xs.iter().enumerate().map(|(j, x)| (format!("x{j}"), x.clone())).collect();
        let fit = ols(&y, &named).unwrap();
        let oracle = normal_equations(&y, &xs);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            ols_err = ols_err.max((a - b).abs());
        }
    }
    verdict(
        "bootstrap_and_ols",
        (COVERAGE_LO..=COVERAGE_HI).contains(&coverage) && ols_err < OLS_TOL,
        format!(
            "coverage {coverage:.3} over {COVERAGE_TRIALS} trials (in [{COVERAGE_LO}, {COVERAGE_HI}]); OLS vs normal equations {ols_err:.1e} (<{OLS_TOL:.0e})"
        ),
    );
}

#[test]
fn selection_rule_equivalence() {
    let _g = serial();
    let mut r = rng(99);
    let mut agree = 0usize;
    let mut no_pass_tables = 0usize;
    for t in 0..SELECTION_TABLES {
        let baseline_f1 = 0.5;
        let n = r.random_range(1..15);
        // Coarse values force ties on every sort key.
        let force_fail = t % 10 == 0;
        let rows: Vec<OperatingPointRow> = (0..n)
            .map(|i| {
                let dh = if force_fail { -(r.random_range(0..3) as f64) * 0.01 } else { (r.random_range(0..5) as f64 - 2.0) * 0.01 };
                let f1 = baseline_f1 + (r.random_range(0..4) as f64 - 1.0) * 0.05;
                let lambda = -((r.random_range(1..4) as f64) * 0.1);
                OperatingPointRow {
                    condition: format!("c{:02}", r.random_range(0..100) * 100 + i),
                    strategy: "steerfair_attention_output".into(),
                    vector: "v".into(),
                    lambda,
                    mean_hsr: 0.0,
                    delta_hsr: dh,
                    delta_judge: 0.0,
                    macro_f1: f1,
                    micro_f1: f1,
                    passes_selection: passes_selection(f1, baseline_f1, dh),
                    delta_hsr_ci: None,
                    delta_f1_ci: None,
                }
            })
            .collect();
        let got = select_operating_point(&rows).map(|r| r.condition.clone());
        let want = select_exhaustive(&rows, baseline_f1);
        if want.is_none() {
            no_pass_tables += 1;
        }
        if got == want {
            agree += 1;
        }
    }
    verdict(
        "selection_rule",
        agree == SELECTION_TABLES && no_pass_tables > 0,
        format!("{agree}/{SELECTION_TABLES} tables agree with the exhaustive oracle; {no_pass_tables} tables with no passing row"),
    );
}
