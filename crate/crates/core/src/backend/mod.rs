//! Label scoring. A [`Backend`] returns one log-score per label
//! verbalization as the continuation of a prompt; [`score_labels`]
//! renormalizes those over the label set.

mod cache;
mod mock;
mod remote;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabelSet;

pub use cache::{cache_key, CacheStats, CachedBackend, CACHE_FORMAT_VERSION};
pub use mock::{mock_score, AssociationTable, MockBackend};
pub use remote::{RemoteBackend, RemoteOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("scoring error: {0}")]
    Scoring(String),
    #[error("dimension mismatch: expected {expected} labels, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("invalid scores: {0}")]
    InvalidScores(String),
    #[error("backend config: {0}")]
    Config(String),
}

/// Per-label probabilities, aligned with the label set order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelScores {
    probs: Vec<f64>,
}

impl LabelScores {
    /// Softmax over per-label log-scores.
    pub fn from_log_scores(log_scores: &[f64]) -> Result<Self, BackendError> {
        if log_scores.is_empty() {
            return Err(BackendError::InvalidScores("no labels".into()));
        }
        if let Some(x) = log_scores.iter().find(|x| !x.is_finite()) {
            return Err(BackendError::InvalidScores(format!(
                "non-finite log-score {x}"
            )));
        }
        Ok(Self {
            probs: softmax(log_scores),
        })
    }

    /// Validate an explicit probability vector.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, BackendError> {
        if probs.is_empty() {
            return Err(BackendError::InvalidScores("no labels".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(BackendError::InvalidScores(format!(
                "probabilities must be positive and finite: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BackendError::InvalidScores(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Numerically stable softmax. Underflowed entries are lifted to the
/// smallest positive double so every probability stays strictly positive.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter()
        .map(|e| (e / sum).max(f64::MIN_POSITIVE))
        .collect()
}

pub type ScoreResult = Result<Vec<f64>, BackendError>;

/// Anything that can produce per-label continuation log-scores.
pub trait Backend: Send + Sync {
    fn kind(&self) -> &str;

    fn model_id(&self) -> &str;

    /// One log-score per label in `labels` order, for `" " + label`
    /// continuing `prompt`.
    fn log_scores(&self, prompt: &str, labels: &LabelSet) -> ScoreResult;

    /// Score many prompts. Output order matches input order.
    fn log_scores_batch(&self, prompts: &[String], labels: &LabelSet) -> Vec<ScoreResult> {
        prompts.iter().map(|p| self.log_scores(p, labels)).collect()
    }
}

fn check_prompt(prompt: &str) -> Result<(), BackendError> {
    if prompt.is_empty() {
        Err(BackendError::EmptyPrompt)
    } else {
        Ok(())
    }
}

fn normalize(labels: &LabelSet, raw: ScoreResult) -> Result<LabelScores, BackendError> {
    let raw = raw?;
    if raw.len() != labels.len() {
        return Err(BackendError::DimensionMismatch {
            expected: labels.len(),
            got: raw.len(),
        });
    }
    LabelScores::from_log_scores(&raw)
}

pub fn score_labels(
    backend: &dyn Backend,
    prompt: &str,
    labels: &LabelSet,
) -> Result<LabelScores, BackendError> {
    check_prompt(prompt)?;
    normalize(labels, backend.log_scores(prompt, labels))
}

pub fn score_batch(
    backend: &dyn Backend,
    prompts: &[String],
    labels: &LabelSet,
) -> Vec<Result<LabelScores, BackendError>> {
    if let Some(i) = prompts.iter().position(|p| p.is_empty()) {
        log::debug!("empty prompt at index {i}");
    }
    let valid: Vec<String> = prompts.iter().filter(|p| !p.is_empty()).cloned().collect();
    let mut scored = backend.log_scores_batch(&valid, labels).into_iter();
    prompts
        .iter()
        .map(|p| {
            if p.is_empty() {
                Err(BackendError::EmptyPrompt)
            } else {
                let raw = scored
                    .next()
                    .unwrap_or_else(|| Err(BackendError::Scoring("missing batch result".into())));
                normalize(labels, raw)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Association table for the mock backend; uniform and empty when absent.
    pub mock_table: Option<PathBuf>,
    pub timeout_secs: u64,
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub api_key_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            mock_table: None,
            timeout_secs: 60,
            parallelism: 4,
            cache_dir: None,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.parallelism == 0 {
            return Err(BackendError::Config(
                "parallelism must be at least 1".into(),
            ));
        }
        if self.kind == BackendKind::Remote && (self.endpoint.is_none() || self.model.is_none()) {
            return Err(BackendError::Config(
                "remote backend requires an endpoint and a model".into(),
            ));
        }
        Ok(())
    }

    /// Build the configured backend, wrapped in the on-disk cache when a
    /// cache directory is set.
    pub fn build(&self, n_labels_hint: Option<usize>) -> Result<Arc<dyn Backend>, BackendError> {
        self.validate()?;
        let inner: Arc<dyn Backend> = match self.kind {
            BackendKind::Mock => {
                let backend = match &self.mock_table {
                    Some(path) => MockBackend::from_file(path)?,
                    None => MockBackend::new(
                        "mock-uniform",
                        AssociationTable::uniform(n_labels_hint.unwrap_or(2)),
                    )?,
                };
                let backend = match &self.model {
                    Some(m) => backend.with_model_id(m.clone()),
                    None => backend,
                };
                Arc::new(backend)
            }
            BackendKind::Remote => {
                let opts = RemoteOptions {
                    endpoint: self.endpoint.clone().unwrap_or_default(),
                    model: self.model.clone().unwrap_or_default(),
                    api_key: std::env::var(&self.api_key_env).ok(),
                    timeout: Duration::from_secs(self.timeout_secs),
                    parallelism: self.parallelism,
                    ..RemoteOptions::default()
                };
                Arc::new(RemoteBackend::new(opts))
            }
        };
        Ok(match &self.cache_dir {
            Some(dir) => Arc::new(CachedBackend::new(inner, dir.clone())),
            None => inner,
        })
    }
}
