//! Experiment runner. For every dataset and seed it builds one context,
//! scores the evaluation set once, estimates one prior per calibration
//! method and applies each prediction rule to the shared scores.

mod bias;
mod report;
mod sensitivity;

use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{score_batch, Backend, BackendError, LabelScores};
use crate::calibration::{
    calibrated_predict, estimate_prior, predict_uncalibrated, CalibrationError, CalibrationMethod,
    CalibrationSource, Method, PriorEstimate,
};
use crate::config::{ConfigError, RunSpec};
use crate::dataset::{load_dataset_by_id, Dataset, DatasetError};
use crate::metrics::{
    domain_label_bias, macro_f1, prediction_distribution, stratify, BiasScore, MetricsError,
    PredictionDistribution, Tier, Tiers,
};
use crate::prompt::{build_context, render_prompt, ContextPrompt};
use crate::sampling::{avg_length, build_bag, BagOfWords, SamplingError, WordList};
use crate::seed;

pub use bias::{bias_scan_csv, correlation_csv, run_bias_scan, BiasScanReport, Correlation};
pub use report::{aggregates_csv, write_eval_report, ExampleRecord, ReportHeader};
pub use sensitivity::{run_sensitivity, SweepPoint, SweepRow, SweepTable};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Failure of one (dataset, seed[, method]) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub dataset: String,
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub k: usize,
    pub context_seed: u64,
    pub n_eval: usize,
    pub macro_f1: f64,
    pub distribution: PredictionDistribution,
    pub prior: Option<PriorEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub method: Method,
    pub n_seeds: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub tier: Option<Tier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierAggregate {
    pub tier: Tier,
    pub method: Method,
    pub n_datasets: usize,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: RunSpec,
    pub cells: Vec<CellReport>,
    #[serde(skip)]
    pub examples: Vec<ExampleRecord>,
    pub aggregates: Vec<Aggregate>,
    pub bias: Vec<BiasScore>,
    pub tier_means: Vec<TierAggregate>,
    pub errors: Vec<CellError>,
}

impl EvalReport {
    pub fn cell(&self, dataset: &str, method: Method, seed: u64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.method == method && c.seed == seed)
    }

    pub fn aggregate(&self, dataset: &str, method: Method) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.dataset == dataset && a.method == method)
    }

    /// Per-example predictions of one cell, in evaluation order.
    pub fn predictions(&self, dataset: &str, method: Method, seed: u64) -> Vec<usize> {
        self.examples
            .iter()
            .filter(|e| e.dataset == dataset && e.method == method && e.seed == seed)
            .map(|e| e.prediction)
            .collect()
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// A dataset ready for evaluation: label override applied, evaluation
/// subset fixed, average length known.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub dataset: Dataset,
    /// Indices into `dataset.examples` of the labeled evaluation subset.
    pub eval_idx: Vec<usize>,
    pub golds: Vec<usize>,
    pub length: usize,
}

pub(crate) fn prepare(spec: &RunSpec, dataset: &Dataset) -> Result<Prepared, HarnessError> {
    let dataset = match &spec.label_names {
        Some(names) => dataset.with_label_names(names)?,
        None => dataset.clone(),
    };
    let labeled: Vec<usize> = dataset
        .examples
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.gold.map(|_| i))
        .collect();
    if labeled.is_empty() {
        return Err(HarnessError::Invalid(format!(
            "dataset {} has no labeled examples to evaluate",
            dataset.id
        )));
    }
    let eval_idx = if labeled.len() > spec.eval_cap {
        let mut rng = seed::rng(spec.subset_seed, "eval-subset", &[&dataset.id]);
        let mut picked: Vec<usize> = index::sample(&mut rng, labeled.len(), spec.eval_cap)
            .into_iter()
            .map(|i| labeled[i])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        labeled
    };
    let golds = eval_idx
        .iter()
        .map(|&i| dataset.examples[i].gold.expect("labeled"))
        .collect();
    let length = avg_length(dataset.texts())?;
    Ok(Prepared {
        dataset,
        eval_idx,
        golds,
        length,
    })
}

/// In-domain bag from the unlabeled evaluation texts, optionally restricted
/// to a seeded random subset of `cap` texts.
pub(crate) fn domain_bag(
    prep: &Prepared,
    cap: Option<usize>,
    seed: u64,
) -> Result<BagOfWords, HarnessError> {
    let texts: Vec<&str> = prep.dataset.texts().collect();
    let bag = match cap {
        Some(cap) if cap < texts.len() => {
            let cap_str = cap.to_string();
            let mut rng = seed::rng(seed, "corpus", &[&prep.dataset.id, &cap_str]);
            let mut idx = index::sample(&mut rng, texts.len(), cap).into_vec();
            idx.sort_unstable();
            build_bag(idx.into_iter().map(|i| texts[i]), prep.dataset.id.clone())?
        }
        _ => build_bag(texts, prep.dataset.id.clone())?,
    };
    Ok(bag)
}

pub(crate) struct SeedScores {
    pub context: ContextPrompt,
    pub scores: Vec<LabelScores>,
}

pub(crate) fn score_seed(
    prep: &Prepared,
    k: usize,
    seed: u64,
    backend: &dyn Backend,
) -> Result<SeedScores, HarnessError> {
    let ds = &prep.dataset;
    let context = build_context(ds, k, seed)?;
    let prompts: Vec<String> = prep
        .eval_idx
        .iter()
        .map(|&i| render_prompt(&ds.template, &context, &ds.label_set, &ds.examples[i].text))
        .collect();
    let scores = score_batch(backend, &prompts, &ds.label_set)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeedScores { context, scores })
}

pub(crate) struct PriorInputs<'a> {
    pub backend: &'a dyn Backend,
    pub wordlist: &'a WordList,
    pub corpus_cap: Option<usize>,
}

pub(crate) fn prior_for(
    prep: &Prepared,
    context: &ContextPrompt,
    method: &CalibrationMethod,
    seed: u64,
    inputs: &PriorInputs<'_>,
) -> Result<Option<PriorEstimate>, HarnessError> {
    let bag;
    let source = match method.method {
        Method::None => return Ok(None),
        Method::Cc => None,
        Method::DcEnglish => Some(CalibrationSource::Words(inputs.wordlist)),
        Method::DcInDomain => {
            bag = domain_bag(prep, inputs.corpus_cap, seed)?;
            Some(CalibrationSource::Bag(&bag))
        }
    };
    let mut rng = seed::rng(seed, "prior", &[&prep.dataset.id, method.method.as_str()]);
    let ds = &prep.dataset;
    Ok(Some(estimate_prior(
        inputs.backend,
        &ds.template,
        context,
        &ds.label_set,
        method,
        source,
        prep.length,
        &mut rng,
    )?))
}

pub(crate) fn predict_all(
    scores: &[LabelScores],
    prior: Option<&PriorEstimate>,
) -> Result<Vec<usize>, HarnessError> {
    scores
        .iter()
        .map(|s| match prior {
            Some(p) => Ok(calibrated_predict(s, p)?),
            None => Ok(predict_uncalibrated(s)),
        })
        .collect()
}

pub(crate) fn calibration_method(spec: &RunSpec, method: Method) -> CalibrationMethod {
    CalibrationMethod::new(method)
        .with_m(spec.m_samples)
        .with_length(spec.cal_length)
        .with_cc_token(spec.cc_token.clone())
}

pub(crate) fn load_wordlist(spec: &RunSpec) -> Result<WordList, HarnessError> {
    Ok(match &spec.wordlist {
        Some(path) => WordList::load(path)?,
        None => WordList::bundled(),
    })
}

/// Load every dataset named in the spec; the first failure is returned.
pub fn load_datasets(spec: &RunSpec) -> Result<Vec<Dataset>, HarnessError> {
    spec.datasets
        .iter()
        .map(|id| load_dataset_by_id(&spec.data_dir, id).map_err(HarnessError::from))
        .collect()
}

/// Build the backend, load the word list and datasets, and evaluate.
/// Dataset load failures are recorded in the report.
pub fn run_eval(spec: &RunSpec) -> Result<EvalReport, HarnessError> {
    spec.validate()?;
    let wordlist = load_wordlist(spec)?;
    let mut datasets = Vec::new();
    let mut errors = Vec::new();
    for id in &spec.datasets {
        match load_dataset_by_id(&spec.data_dir, id) {
            Ok(ds) => datasets.push(ds),
            Err(e) => errors.push(CellError {
                dataset: id.clone(),
                seed: None,
                method: None,
                message: e.to_string(),
            }),
        }
    }
    let hint = datasets.first().map(|d| d.label_set.len());
    let backend = spec.backend().build(hint)?;
    let mut report = evaluate(spec, &datasets, backend.as_ref(), &wordlist);
    errors.append(&mut report.errors);
    report.errors = errors;
    Ok(report)
}

/// Evaluate already-loaded datasets against one backend.
pub fn evaluate(
    spec: &RunSpec,
    datasets: &[Dataset],
    backend: &dyn Backend,
    wordlist: &WordList,
) -> EvalReport {
    let mut cells = Vec::new();
    let mut examples = Vec::new();
    let mut errors = Vec::new();
    let mut bias = Vec::new();
    let inputs = PriorInputs {
        backend,
        wordlist,
        corpus_cap: spec.corpus_cap,
    };

    for dataset in datasets {
        let err = |seed, method, e: &dyn std::fmt::Display| CellError {
            dataset: dataset.id.clone(),
            seed,
            method,
            message: e.to_string(),
        };
        let prep = match prepare(spec, dataset) {
            Ok(p) => p,
            Err(e) => {
                errors.push(err(None, None, &e));
                continue;
            }
        };
        if spec.with_bias {
            let mut rng = seed::rng(spec.bias_seed, "bias", &[&dataset.id]);
            match domain_label_bias(
                backend,
                &prep.dataset,
                wordlist,
                spec.bias_samples,
                &mut rng,
            ) {
                Ok(b) => bias.push(b),
                Err(e) => errors.push(err(None, None, &e)),
            }
        }
        for &seed in &spec.seeds {
            let scored = match score_seed(&prep, spec.k, seed, backend) {
                Ok(s) => s,
                Err(e) => {
                    errors.push(err(Some(seed), None, &e));
                    continue;
                }
            };
            for &method in &spec.methods {
                let cm = calibration_method(spec, method);
                let outcome =
                    prior_for(&prep, &scored.context, &cm, seed, &inputs).and_then(|prior| {
                        let preds = predict_all(&scored.scores, prior.as_ref())?;
                        Ok((prior, preds))
                    });
                let (prior, preds) = match outcome {
                    Ok(x) => x,
                    Err(e) => {
                        errors.push(err(Some(seed), Some(method), &e));
                        continue;
                    }
                };
                let n_classes = prep.dataset.label_set.len();
                let f1 = macro_f1(&preds, &prep.golds, n_classes).expect("validated indices");
                let distribution =
                    prediction_distribution(&preds, n_classes).expect("validated indices");
                for (j, (&i, s)) in prep.eval_idx.iter().zip(&scored.scores).enumerate() {
                    examples.push(ExampleRecord {
                        dataset: dataset.id.clone(),
                        seed,
                        method,
                        example_index: i,
                        scores: s.probs().to_vec(),
                        prior: prior.as_ref().map(|p| p.prior.clone()),
                        prediction: preds[j],
                        gold: prep.golds[j],
                    });
                }
                cells.push(CellReport {
                    dataset: dataset.id.clone(),
                    method,
                    seed,
                    k: spec.k,
                    context_seed: scored.context.seed,
                    n_eval: preds.len(),
                    macro_f1: f1,
                    distribution,
                    prior,
                });
            }
        }
    }

    let tiers = (!bias.is_empty()).then(|| stratify(&bias));
    let aggregates = aggregate(spec, datasets, &cells, tiers.as_ref());
    let tier_means = tier_means(spec, &aggregates);
    EvalReport {
        config: spec.clone(),
        cells,
        examples,
        aggregates,
        bias,
        tier_means,
        errors,
    }
}

fn aggregate(
    spec: &RunSpec,
    datasets: &[Dataset],
    cells: &[CellReport],
    tiers: Option<&Tiers>,
) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for ds in datasets {
        for &method in &spec.methods {
            let f1s: Vec<f64> = cells
                .iter()
                .filter(|c| c.dataset == ds.id && c.method == method)
                .map(|c| c.macro_f1)
                .collect();
            if f1s.is_empty() {
                continue;
            }
            let (mean_f1, std_f1) = mean_std(&f1s);
            out.push(Aggregate {
                dataset: ds.id.clone(),
                method,
                n_seeds: f1s.len(),
                mean_f1,
                std_f1,
                tier: tiers.and_then(|t| t.tier_of(&ds.id)),
            });
        }
    }
    out
}

fn tier_means(spec: &RunSpec, aggregates: &[Aggregate]) -> Vec<TierAggregate> {
    let mut out = Vec::new();
    for tier in [Tier::Small, Tier::Medium, Tier::Large] {
        for &method in &spec.methods {
            let means: Vec<f64> = aggregates
                .iter()
                .filter(|a| a.tier == Some(tier) && a.method == method)
                .map(|a| a.mean_f1)
                .collect();
            if !means.is_empty() {
                out.push(TierAggregate {
                    tier,
                    method,
                    n_datasets: means.len(),
                    mean_f1: mean_std(&means).0,
                });
            }
        }
    }
    out
}

/// Build every backend named in the spec.
pub fn build_backends(
    spec: &RunSpec,
    n_labels_hint: Option<usize>,
) -> Result<Vec<Arc<dyn Backend>>, HarnessError> {
    spec.backends
        .iter()
        .map(|b| b.build(n_labels_hint).map_err(HarnessError::from))
        .collect()
}
