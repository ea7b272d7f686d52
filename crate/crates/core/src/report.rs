// SPDX-License-Identifier: MIT OR Apache-2.0

//! Tabular outputs, provenance blocks and run-directory manifests.
//!
//! CSV headers are fixed by the row structs below. Formats that cannot carry
//! a provenance block inline get a `<file>.provenance.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{AttentionRecord, DoseResponsePoint, MetricRow, OperatingPointRow};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "sdls-run/1";
pub const SIDECAR_SUFFIX: &str = ".provenance.json";

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::InvalidArgument(format!("{}: {e}", path.display()))
    }
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn bits(labels: &[bool]) -> String {
    labels.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Per-case metric CSV row. Label vectors are bit strings in lexicon order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCsvRow {
    pub condition: String,
    pub image_id: String,
    pub hsr: f64,
    pub hsc: usize,
    pub tokens: usize,
    pub judge_prob: f64,
    pub labels_pred: String,
    pub labels_ref: String,
}

impl From<&MetricRow> for MetricCsvRow {
    fn from(r: &MetricRow) -> Self {
        Self {
            condition: r.condition.clone(),
            image_id: r.image_id.clone(),
            hsr: r.hsr,
            hsc: r.hsc,
            tokens: r.tokens,
            judge_prob: r.judge_prob,
            labels_pred: bits(&r.labels_pred),
            labels_ref: bits(&r.labels_ref),
        }
    }
}

/// Operating-point CSV row; missing intervals are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointCsvRow {
    pub condition: String,
    pub vector: String,
    pub strategy: String,
    pub lambda: f64,
    pub mean_hsr: f64,
    pub delta_hsr: f64,
    pub delta_hsr_lo: Option<f64>,
    pub delta_hsr_hi: Option<f64>,
    pub delta_judge: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub delta_f1_lo: Option<f64>,
    pub delta_f1_hi: Option<f64>,
    pub passes_selection: bool,
}

impl From<&OperatingPointRow> for OperatingPointCsvRow {
    fn from(r: &OperatingPointRow) -> Self {
        Self {
            condition: r.condition.clone(),
            vector: r.vector.clone(),
            strategy: r.strategy.clone(),
            lambda: r.lambda,
            mean_hsr: r.mean_hsr,
            delta_hsr: r.delta_hsr,
            delta_hsr_lo: r.delta_hsr_ci.map(|c| c.0),
            delta_hsr_hi: r.delta_hsr_ci.map(|c| c.1),
            delta_judge: r.delta_judge,
            macro_f1: r.macro_f1,
            micro_f1: r.micro_f1,
            delta_f1_lo: r.delta_f1_ci.map(|c| c.0),
            delta_f1_hi: r.delta_f1_ci.map(|c| c.1),
            passes_selection: r.passes_selection,
        }
    }
}

pub fn write_metric_rows(rows: &[MetricRow], path: &Path) -> Result<()> {
    write_csv(&rows.iter().map(MetricCsvRow::from).collect::<Vec<_>>(), path)
}

pub fn write_operating_points(rows: &[OperatingPointRow], path: &Path) -> Result<()> {
    write_csv(&rows.iter().map(OperatingPointCsvRow::from).collect::<Vec<_>>(), path)
}

/// `lambda,mean_delta_logit,stderr,probes`
pub fn write_dose_response(points: &[DoseResponsePoint], path: &Path) -> Result<()> {
    write_csv(points, path)
}

/// `image_id,step,token,kind,entropy`
pub fn write_attention(records: &[AttentionRecord], path: &Path) -> Result<()> {
    write_csv(records, path)
}

/// What produced an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceBlock {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Input files with their SHA-256 digests.
    #[serde(default)]
    pub inputs: Vec<FileDigest>,
}

impl ProvenanceBlock {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool: "sdls".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            inputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
            bytes: fs::metadata(path).map_err(|e| Error::io(path, e))?.len(),
        });
        Ok(self)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("provenance serializes")
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(SIDECAR_SUFFIX);
    PathBuf::from(s)
}

pub fn write_sidecar(path: &Path, block: &ProvenanceBlock) -> Result<()> {
    write_json(block, &sidecar_path(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Machine-readable index of one run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub name: String,
    /// Every file under the run directory except the manifest, sorted by path.
    pub files: Vec<FileDigest>,
    /// Provenance blocks keyed by the relative path they describe.
    pub provenance: Vec<(String, serde_json::Value)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Indexes `run_dir`. Paths are relative with `/` separators.
pub fn build_manifest(run_dir: &Path, summary: Option<serde_json::Value>) -> Result<RunManifest> {
    if !run_dir.is_dir() {
        return Err(Error::InvalidArgument(format!("{} is not a directory", run_dir.display())));
    }
    let mut paths = Vec::new();
    walk(run_dir, &mut paths)?;
    let rel = |p: &Path| -> String {
        p.strip_prefix(run_dir)
            .unwrap_or(p)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    };
    let mut files = Vec::new();
    let mut provenance = Vec::new();
    for p in &paths {
        let name = rel(p);
        if name == MANIFEST_FILE {
            continue;
        }
        if let Some(target) = name.strip_suffix(SIDECAR_SUFFIX) {
            provenance.push((target.to_string(), read_json(p)?));
        }
        files.push(FileDigest {
            sha256: sha256_file(p)?,
            bytes: fs::metadata(p).map_err(|e| Error::io(p, e))?.len(),
            path: name,
        });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    provenance.sort_by(|a, b| a.0.cmp(&b.0));
    let name = run_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(RunManifest {
        format: MANIFEST_FORMAT.into(),
        name,
        files,
        provenance,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_files_and_sidecars_in_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("eval")).unwrap();
        fs::write(dir.path().join("b.csv"), "x\n1\n").unwrap();
        fs::write(dir.path().join("eval/a.csv"), "y\n2\n").unwrap();
        let block = ProvenanceBlock::new("eval", 3, serde_json::json!({"k": 1}));
        write_sidecar(&dir.path().join("b.csv"), &block).unwrap();
        write_json(&1, &dir.path().join(MANIFEST_FILE)).unwrap();
        let m = build_manifest(dir.path(), None).unwrap();
        let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["b.csv", "b.csv.provenance.json", "eval/a.csv"]);
        assert_eq!(m.provenance.len(), 1);
        assert_eq!(m.provenance[0].0, "b.csv");
        assert_eq!(m.provenance[0].1["seed"], 3);
        assert_eq!(build_manifest(dir.path(), None).unwrap(), m);
    }

    #[test]
    fn operating_point_csv_round_trips() {
        let row = OperatingPointRow {
            condition: "sdiv|steerfair_attention_output|-0.1".into(),
            strategy: "steerfair_attention_output".into(),
            vector: "sdiv".into(),
            lambda: -0.1,
            mean_hsr: 0.05,
            delta_hsr: 0.01,
            delta_judge: 0.02,
            macro_f1: 0.9,
            micro_f1: 0.91,
            passes_selection: true,
            delta_hsr_ci: Some((0.0, 0.02)),
            delta_f1_ci: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.csv");
        write_operating_points(std::slice::from_ref(&row), &path).unwrap();
        let back: Vec<OperatingPointCsvRow> = read_csv(&path).unwrap();
        assert_eq!(back, vec![OperatingPointCsvRow::from(&row)]);
    }
}
