use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use super::report::tier_str;
use super::CellError;
use crate::backend::Backend;
use crate::dataset::Dataset;
use crate::metrics::{bias_correlation, domain_label_bias, stratify, BiasScore, Tiers};
use crate::sampling::WordList;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub model_a: String,
    pub model_b: String,
    pub r: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasScanReport {
    pub scores: Vec<BiasScore>,
    /// One stratification per model, in backend order.
    pub tiers: Vec<Tiers>,
    pub correlations: Vec<Correlation>,
    pub errors: Vec<CellError>,
}

/// Domain-label bias for every (dataset, model) pair, plus pairwise
/// correlations when several models are given.
pub fn run_bias_scan(
    datasets: &[Dataset],
    backends: &[Arc<dyn Backend>],
    wordlist: &WordList,
    n_samples: usize,
    bias_seed: u64,
) -> BiasScanReport {
    let mut per_model: Vec<Vec<BiasScore>> = Vec::new();
    let mut errors = Vec::new();
    for backend in backends {
        let mut scores = Vec::new();
        for ds in datasets {
            // same stream as the eval harness, so the two agree
            let mut rng = seed::rng(bias_seed, "bias", &[&ds.id]);
            match domain_label_bias(backend.as_ref(), ds, wordlist, n_samples, &mut rng) {
                Ok(s) => scores.push(s),
                Err(e) => errors.push(CellError {
                    dataset: ds.id.clone(),
                    seed: None,
                    method: None,
                    message: format!("{}: {e}", backend.model_id()),
                }),
            }
        }
        per_model.push(scores);
    }

    let mut correlations = Vec::new();
    for i in 0..per_model.len() {
        for j in i + 1..per_model.len() {
            let (r, error) = match bias_correlation(&per_model[i], &per_model[j]) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            correlations.push(Correlation {
                model_a: backends[i].model_id().to_string(),
                model_b: backends[j].model_id().to_string(),
                r,
                error,
            });
        }
    }
    let tiers = per_model.iter().map(|s| stratify(s)).collect();
    BiasScanReport {
        scores: per_model.into_iter().flatten().collect(),
        tiers,
        correlations,
        errors,
    }
}

/// `dataset_id,model_id,bias,tier` rows. `tiers` holds one stratification
/// per model; each score takes its tier from its own model's.
pub fn bias_scan_csv(scores: &[BiasScore], tiers: &[Tiers]) -> String {
    let mut out = String::from("dataset_id,model_id,bias,tier\n");
    for s in scores {
        let tier = tiers
            .iter()
            .find(|t| {
                [&t.small, &t.medium, &t.large]
                    .iter()
                    .any(|v| v.iter().any(|x| x.model_id == s.model_id))
            })
            .and_then(|t| t.tier_of(&s.dataset_id));
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.dataset_id,
            s.model_id,
            s.value,
            tier_str(tier)
        );
    }
    out
}

pub fn correlation_csv(correlations: &[Correlation]) -> String {
    let mut out = String::from("model_a,model_b,r\n");
    for c in correlations {
        let r = c.r.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", c.model_a, c.model_b, r);
    }
    out
}
