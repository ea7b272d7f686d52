// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use proptest::prelude::*;

use common::*;
use sdls::bundle::ActivationBundle;
use sdls::corpus::{edit_distance, tokenize, CueDictionary};
use sdls::forge::{load_vector, save_vector, Geometry, Mcv, Role, SteeringVector, VectorKind};
use sdls::linalg::{pca_top_k, project_out_subspace, qr_orthonormal_basis, Matrix, Vector};
use sdls::metrics::{hsr, paired_bootstrap_ci, passes_selection, select_operating_point, spearman, OperatingPointRow};
use sdls::model::norm_preserving_inject;
use sdls::Error;

fn finite_vec(len: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn columns(max_dim: usize, max_cols: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (2..=max_dim).prop_flat_map(move |d| {
        (1..=max_cols.min(d)).prop_flat_map(move |c| {
            prop::collection::vec(finite_vec(d), c).prop_map(move |cols| (d, cols))
        })
    })
}

const WORDS: [&str; 18] = [
    "stable", "no", "change", "prior", "previous", "since", "the", "compared", "with", "more", "less", "mild",
    "effusion", "opacity", "left", ".", "interval", "significant",
];

fn report() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..20)
        .prop_map(|w| w.into_iter().map(String::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn injection_keeps_norm(h in finite_vec(1..40), seed in any::<u64>(), lambda in -2.0f64..2.0) {
        prop_assume!(norm(&h) > 1e-3);
        let v = unit(&gaussian(&mut rng(seed), h.len()));
        match norm_preserving_inject(&h, &v, lambda) {
            Ok(out) => prop_assert!((norm(&out) - norm(&h)).abs() <= 1e-12 * norm(&h).max(1.0)),
            Err(Error::Cancellation { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn injection_at_zero_strength_is_identity(h in finite_vec(1..40), seed in any::<u64>()) {
        let v = unit(&gaussian(&mut rng(seed), h.len()));
        prop_assert_eq!(norm_preserving_inject(&h, &v, 0.0).unwrap(), h);
    }

    #[test]
    fn injection_moves_toward_direction(h in finite_vec(2..40), seed in any::<u64>(), lambda in 0.01f64..1.0) {
        prop_assume!(norm(&h) > 1e-3);
        let v = unit(&gaussian(&mut rng(seed), h.len()));
        let out = norm_preserving_inject(&h, &v, lambda).unwrap();
        prop_assert!(dot(&out, &v) / norm(&out) >= dot(&h, &v) / norm(&h) - 1e-12);
    }

    #[test]
    fn qr_is_orthonormal_and_reconstructs((d, cols) in columns(12, 6)) {
        let v = Matrix::from_columns(&cols).unwrap();
        match qr_orthonormal_basis(&v) {
            Ok(qr) => {
                let c = cols.len();
                prop_assert!(qr.q.t_matmul(&qr.q).unwrap().max_abs_diff(&Matrix::identity(c)) < 1e-10);
                prop_assert!(qr.q.matmul(&qr.r).unwrap().max_abs_diff(&v) < 1e-9 * v.frobenius_norm().max(1.0));
                for i in 0..c {
                    prop_assert!(qr.r[(i, i)] >= 0.0);
                    for j in 0..i {
                        prop_assert_eq!(qr.r[(i, j)], 0.0);
                    }
                }
                prop_assert_eq!(qr.q.rows(), d);
            }
            Err(Error::RankDeficient { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn projection_removes_the_subspace((d, cols) in columns(12, 5), x_seed in any::<u64>()) {
        let v = Matrix::from_columns(&cols).unwrap();
        prop_assume!(qr_orthonormal_basis(&v).is_ok());
        let q = qr_orthonormal_basis(&v).unwrap().q;
        let x = gaussian(&mut rng(x_seed), d);
        let once = project_out_subspace(&x, &q).unwrap();
        let twice = project_out_subspace(&once, &q).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        for u in q.columns() {
            prop_assert!(dot(&once, &u).abs() < 1e-9 * norm(&x).max(1.0));
        }
    }

    #[test]
    fn pca_projector_matches_eigen_oracle(seed in any::<u64>(), d in 3usize..10, n in 4usize..16) {
        let mut r = rng(seed);
        let centered = center_columns(&gaussian_matrix(&mut r, d, n));
        let k = 1 + (seed as usize) % d.min(n - 1);
        let basis = pca_top_k(&to_matrix(&centered), k).unwrap();
        let (_, vecs) = jacobi_eigen(&gram_rows(&centered));
        prop_assert!(max_abs_diff(&projector(&vecs[..k], d), &projector(&basis.components(), d)) < 1e-6);
        let top = power_iteration(&gram_rows(&centered), 2000);
        prop_assert!(dot(&top, &basis.components()[0]).abs() > 1.0 - 1e-6);
    }

    #[test]
    fn hsr_is_a_covered_fraction(tokens in report()) {
        let dict = CueDictionary::standard();
        let rate = hsr(&tokens, &dict).unwrap();
        let covered = dict.covered_mask(&tokens).iter().filter(|&&c| c).count();
        prop_assert!((0.0..=1.0).contains(&rate));
        prop_assert_eq!(rate, covered as f64 / tokens.len() as f64);
    }

    #[test]
    fn cue_free_suffix_never_raises_hsr(tokens in report(), pad in 1usize..8) {
        let dict = CueDictionary::standard();
        let mut longer = tokens.clone();
        longer.push(".".into());
        longer.extend(std::iter::repeat_n("opacity".to_string(), pad));
        prop_assert!(hsr(&longer, &dict).unwrap() <= hsr(&tokens, &dict).unwrap());
    }

    #[test]
    fn spans_never_touch_negative_phrases(tokens in report()) {
        let dict = CueDictionary::standard();
        let excluded = dict.excluded_mask(&tokens);
        for s in dict.find_spans(&tokens) {
            prop_assert!(!excluded[s.start..s.end()].iter().any(|&e| e));
        }
    }

    #[test]
    fn tokenize_is_idempotent(text in "[a-zA-Z .,;:-]{0,60}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn edit_distance_is_a_metric(a in report(), b in report(), c in report()) {
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        prop_assert_eq!(edit_distance(&a, &a), 0);
        prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
    }

    #[test]
    fn bootstrap_interval_is_ordered_and_bounded(d in prop::collection::vec(-5.0f64..5.0, 1..60), seed in any::<u64>()) {
        let (lo, hi) = paired_bootstrap_ci(&d, 200, 0.05, seed).unwrap();
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= hi);
        prop_assert!(lo >= min - 1e-12 && hi <= max + 1e-12);
        prop_assert_eq!(paired_bootstrap_ci(&d, 200, 0.05, seed).unwrap(), (lo, hi));
    }

    #[test]
    fn spearman_ignores_monotone_maps(x in prop::collection::vec(-5.0f64..5.0, 3..30), seed in any::<u64>()) {
        let y = gaussian(&mut rng(seed), x.len());
        prop_assume!(x.iter().any(|&v| v != x[0]));
        let rho = spearman(&x, &y).unwrap();
        let mapped: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
        prop_assert!((spearman(&mapped, &y).unwrap() - rho).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
    }

    #[test]
    fn selection_matches_oracle_and_ignores_order(
        spec in prop::collection::vec((0u8..5, 0u8..4, 1u8..4), 0..12),
        rot in 0usize..12,
    ) {
        let base = 0.5;
        let rows: Vec<OperatingPointRow> = spec
            .iter()
            .enumerate()
            .map(|(i, &(dh, f1, l))| {
                let (dh, f1, lambda) = ((dh as f64 - 2.0) * 0.01, base + (f1 as f64 - 1.0) * 0.05, -(l as f64) * 0.1);
                OperatingPointRow {
                    condition: format!("c{i:02}"),
                    strategy: "s".into(),
                    vector: "v".into(),
                    lambda,
                    mean_hsr: 0.0,
                    delta_hsr: dh,
                    delta_judge: 0.0,
                    macro_f1: f1,
                    micro_f1: f1,
                    passes_selection: passes_selection(f1, base, dh),
                    delta_hsr_ci: None,
                    delta_f1_ci: None,
                }
            })
            .collect();
        let got = select_operating_point(&rows).map(|r| r.condition.clone());
        prop_assert_eq!(&got, &select_exhaustive(&rows, base));
        let mut rotated = rows.clone();
        if !rotated.is_empty() {
            let k = rot % rotated.len();
            rotated.rotate_left(k);
        }
        prop_assert_eq!(select_operating_point(&rotated).map(|r| r.condition.clone()), got);
    }

    #[test]
    fn bundle_bytes_round_trip(n in 0usize..6, segments in 1usize..4, d_model in 1usize..6, seed in any::<u64>()) {
        let g = Geometry { segments, d_model };
        let mut r = rng(seed);
        let mcvs: Vec<Mcv> = (0..n)
            .map(|i| Mcv {
                image_id: format!("i{i}"),
                role: Role::Hist,
                geometry: g,
                z: Vector(gaussian(&mut r, g.dim()).iter().map(|&x| x as f32 as f64).collect()),
            })
            .collect();
        let b = ActivationBundle::new("p", g, &mcvs, None).unwrap();
        let bytes = b.to_bytes().unwrap();
        let back = ActivationBundle::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes.clone());
        prop_assert_eq!(back.mcvs().collect::<Vec<_>>(), mcvs);
        if n > 0 {
            let mut bad = bytes;
            let last = bad.len() - 1;
            bad[last] ^= 1;
            prop_assert!(ActivationBundle::from_bytes(&bad).is_err());
        }
    }

    #[test]
    fn vector_files_round_trip(seed in any::<u64>(), segments in 1usize..4, d_model in 1usize..8) {
        let g = Geometry { segments, d_model };
        let v = SteeringVector::new(VectorKind::Sdiv, g, Vector(gaussian(&mut rng(seed), g.dim()))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        save_vector(&v, &path).unwrap();
        prop_assert_eq!(load_vector(&path).unwrap(), v);
    }
}
