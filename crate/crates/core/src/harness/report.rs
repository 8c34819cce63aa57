use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalReport, HarnessError};
use crate::calibration::Method;
use crate::config::RunSpec;
use crate::metrics::Tier;

/// One scored evaluation example under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub dataset: String,
    pub seed: u64,
    pub method: Method,
    /// Index into the dataset's example list.
    pub example_index: usize,
    pub scores: Vec<f64>,
    pub prior: Option<Vec<f64>>,
    pub prediction: usize,
    pub gold: usize,
}

/// First line of `examples.jsonl`: the effective configuration.
#[derive(Debug, Serialize)]
pub struct ReportHeader<'a> {
    pub record: &'static str,
    pub version: &'static str,
    pub config: &'a RunSpec,
}

impl<'a> ReportHeader<'a> {
    pub fn new(config: &'a RunSpec) -> Self {
        Self {
            record: "header",
            version: env!("CARGO_PKG_VERSION"),
            config,
        }
    }
}

pub(crate) fn tier_str(tier: Option<Tier>) -> &'static str {
    tier.map(|t| t.as_str()).unwrap_or("")
}

pub fn aggregates_csv(report: &EvalReport) -> String {
    let mut out = String::from("dataset,method,n_seeds,mean_f1,std_f1,tier\n");
    for a in &report.aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            a.dataset,
            a.method,
            a.n_seeds,
            a.mean_f1,
            a.std_f1,
            tier_str(a.tier)
        );
    }
    out
}

fn examples_jsonl(report: &EvalReport) -> Result<String, serde_json::Error> {
    let mut out = serde_json::to_string(&ReportHeader::new(&report.config))?;
    out.push('\n');
    for e in &report.examples {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}

pub(crate) fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, HarnessError> {
    fs::write(&path, contents).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Write `examples.jsonl`, `aggregates.csv`, `summary.json` and, when bias
/// scores were computed, `bias.csv`. Returns the written paths.
pub fn write_eval_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let json_err = |e: serde_json::Error| HarnessError::Invalid(format!("serializing report: {e}"));
    let mut written = vec![
        write_file(
            dir.join("examples.jsonl"),
            &examples_jsonl(report).map_err(json_err)?,
        )?,
        write_file(dir.join("aggregates.csv"), &aggregates_csv(report))?,
    ];
    let mut summary = serde_json::to_string_pretty(report).map_err(json_err)?;
    summary.push('\n');
    written.push(write_file(dir.join("summary.json"), &summary)?);
    if !report.bias.is_empty() {
        let tiers = crate::metrics::stratify(&report.bias);
        let csv = super::bias_scan_csv(&report.bias, std::slice::from_ref(&tiers));
        written.push(write_file(dir.join("bias.csv"), &csv)?);
    }
    Ok(written)
}
