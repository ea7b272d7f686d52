// SPDX-License-Identifier: MIT OR Apache-2.0

//! History-span metrics, label fidelity, the judge, and the statistics used
//! to compare conditions.
//!
//! ```text
//! cargo run --example metrics
//! ```

use sdls::corpus::{tokenize, CueDictionary, LabelLexicon};
use sdls::metrics::{fidelity_f1, hsc, hsr, ols, paired_bootstrap_ci, Judge, LogisticJudge};

fn main() -> sdls::Result<()> {
    let dict = CueDictionary::standard();
    let judge = LogisticJudge::new(dict.clone());
    let reports = [
        "mild left effusion .",
        "no prior studies . mild left effusion .",
        "compared with the previous exam , the effusion has increased .",
        "stable cardiomegaly . no interval change .",
    ];
    for text in reports {
        let t = tokenize(text);
        let spans: Vec<String> = dict
            .find_spans(&t)
            .iter()
            .map(|s| format!("{}:{}", t[s.start..s.end()].join(" "), s.category))
            .collect();
        println!(
            "{text:<64} HSR {:.3}  HSC {}  judge {:.3}  spans {spans:?}",
            hsr(&t, &dict)?,
            hsc(&t, &dict),
            judge.prob("", "", &t)?
        );
    }

    let lexicon = LabelLexicon::standard(14, 42)?;
    let pred = vec![tokenize("small left effusion ."), tokenize("no effusion . mild cardiomegaly .")];
    let refs = vec![tokenize("small left effusion ."), tokenize("mild cardiomegaly .")];
    let f1 = fidelity_f1(&pred, &refs, &lexicon)?;
    println!("macro-F1 {:.3}  micro-F1 {:.3}", f1.macro_f1, f1.micro_f1);

    let deltas: Vec<f64> = (0..50).map(|i| 0.02 + ((i * 37 % 11) as f64 - 5.0) * 0.01).collect();
    let (lo, hi) = paired_bootstrap_ci(&deltas, 10_000, 0.05, 0)?;
    println!("ΔHSR 95% CI [{lo:.4}, {hi:.4}]");

    let x: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 0.2 + 1.5 * v + ((i % 3) as f64 - 1.0) * 0.01).collect();
    let fit = ols(&y, &[("x".into(), x)])?;
    println!("ols {:?} t {:?} R² {:.4}", fit.coefficients, fit.t_stats, fit.r_squared);
    Ok(())
}
