// SPDX-License-Identifier: MIT OR Apache-2.0

//! Condition sweeps with a shared baseline.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InjectionPlan, SliceMode, Strategy};
use crate::corpus::EvalCase;
use crate::error::{Error, Result};
use crate::forge::SteeringVector;
use crate::model::{DecodeConfig, Encoded, ToyModel};
use crate::report::{read_csv, write_csv};

pub const FINE_GRID: [f64; 5] = [-0.1, -0.2, -0.3, -0.4, -0.5];
pub const GENTLE_GRID: [f64; 5] = [-5.0, -10.0, -15.0, -20.0, -25.0];
pub const BASELINE_CONDITION: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub strategies: Vec<Strategy>,
    pub fine_grid: Vec<f64>,
    pub gentle_grid: Vec<f64>,
    /// Vector files, resolved by the caller.
    pub vectors: Vec<String>,
    pub slicing: SliceMode,
    pub decay: Option<f64>,
    pub decode: DecodeConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::SteerfairAttentionOutput],
            fine_grid: FINE_GRID.to_vec(),
            gentle_grid: GENTLE_GRID.to_vec(),
            vectors: Vec::new(),
            slicing: SliceMode::PerLayer,
            decay: None,
            decode: DecodeConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn grid(&self, strategy: Strategy) -> &[f64] {
        if strategy.is_additive() {
            &self.gentle_grid
        } else {
            &self.fine_grid
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Plan("sweep has no strategies".into()));
        }
        for &s in &self.strategies {
            let g = self.grid(s);
            if g.is_empty() {
                return Err(Error::Plan(format!("empty strength grid for {s}")));
            }
            if g.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFinite("strength grid"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseOutput {
    pub image_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "error", rename_all = "snake_case")]
pub enum ConditionStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRun {
    pub id: String,
    pub vector: String,
    pub strategy: Strategy,
    pub lambda: f64,
    #[serde(flatten)]
    pub status: ConditionStatus,
    #[serde(skip)]
    pub outputs: Vec<CaseOutput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub baseline: Vec<CaseOutput>,
    pub conditions: Vec<ConditionRun>,
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub condition: String,
    pub vector: String,
    pub strategy: String,
    pub lambda: f64,
    pub image_id: String,
    /// Generated tokens joined by single spaces.
    pub text: String,
}

impl SweepResult {
    /// Baseline rows first, then every successful condition in sweep order.
    pub fn rows(&self) -> Vec<SweepRow> {
        let base = self.baseline.iter().map(|o| SweepRow {
            condition: BASELINE_CONDITION.into(),
            vector: String::new(),
            strategy: String::new(),
            lambda: 0.0,
            image_id: o.image_id.clone(),
            text: o.tokens.join(" "),
        });
        let cond = self
            .conditions
            .iter()
            .filter(|c| c.status == ConditionStatus::Ok)
            .flat_map(|c| {
                c.outputs.iter().map(move |o| SweepRow {
                    condition: c.id.clone(),
                    vector: c.vector.clone(),
                    strategy: c.strategy.to_string(),
                    lambda: c.lambda,
                    image_id: o.image_id.clone(),
                    text: o.tokens.join(" "),
                })
            });
        base.chain(cond).collect()
    }
}

/// `condition,vector,strategy,lambda,image_id,text`
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_csv(rows, path)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    read_csv(path)
}

/// Names that stay distinct when two vectors share a kind.
fn vector_names(vectors: &[SteeringVector]) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for v in vectors {
        *counts.entry(v.name()).or_default() += 1;
    }
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let n = v.name();
            if counts[&n] > 1 {
                format!("{n}_{i}")
            } else {
                n
            }
        })
        .collect()
}

fn run_condition(
    model: &ToyModel,
    plan: &InjectionPlan,
    cases: &[EvalCase],
    base: &[Encoded],
    decode: &DecodeConfig,
) -> Result<Vec<CaseOutput>> {
    let program = plan.program(model)?;
    cases
        .iter()
        .zip(base)
        .map(|(case, enc)| {
            let own;
            let enc = if plan.strategy == Strategy::EncoderConcat {
                own = model.encode(&model.image(&case.image_id, &case.reference), Some(&program))?;
                &own
            } else {
                enc
            };
            let trace = model.generate(enc, Some(&program), decode)?;
            Ok(CaseOutput {
                image_id: case.image_id.clone(),
                tokens: trace.words(model),
            })
        })
        .collect()
}

/// Generates the baseline once, then every (vector, strategy, λ) condition.
///
/// `workers` bounds condition-level parallelism; 0 uses all cores. A
/// condition whose plan or any case fails is marked failed and the sweep
/// continues.
pub fn run_sweep(
    model: &ToyModel,
    spec: &SweepSpec,
    vectors: &[SteeringVector],
    cases: &[EvalCase],
    workers: usize,
) -> Result<SweepResult> {
    spec.validate()?;
    if cases.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if vectors.is_empty() {
        return Err(Error::Plan("sweep has no vectors".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let names = vector_names(vectors);
    let mut plans = Vec::new();
    for (v, name) in vectors.iter().zip(&names) {
        for &s in &spec.strategies {
            for &lambda in spec.grid(s) {
                let mut plan = InjectionPlan::new(s, lambda, v.clone());
                plan.slicing = spec.slicing;
                plan.decay = spec.decay;
                plans.push((format!("{name}|{s}|{lambda}"), name.clone(), plan));
            }
        }
    }
    pool.install(|| {
        let base: Vec<Encoded> = cases
            .par_iter()
            .map(|c| model.encode(&model.image(&c.image_id, &c.reference), None))
            .collect::<Result<_>>()?;
        let baseline: Vec<CaseOutput> = cases
            .par_iter()
            .zip(&base)
            .map(|(c, enc)| {
                Ok(CaseOutput {
                    image_id: c.image_id.clone(),
                    tokens: model.generate(enc, None, &spec.decode)?.words(model),
                })
            })
            .collect::<Result<_>>()?;
        let conditions = plans
            .into_par_iter()
            .map(|(id, vector, plan)| {
                let (status, outputs) = match run_condition(model, &plan, cases, &base, &spec.decode) {
                    Ok(o) => (ConditionStatus::Ok, o),
                    Err(e) => (ConditionStatus::Failed(e.to_string()), Vec::new()),
                };
                ConditionRun {
                    id,
                    vector,
                    strategy: plan.strategy,
                    lambda: plan.lambda,
                    status,
                    outputs,
                }
            })
            .collect();
        Ok(SweepResult { baseline, conditions })
    })
}
