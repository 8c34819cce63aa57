//! Content-free prior estimation and the calibrated decision rule.
//!
//! A prior is the mean of the label distributions the model assigns to `M`
//! content-free inputs placed in the query slot of the real context. The
//! calibrated prediction divides each label probability by its prior.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{score_batch, Backend, BackendError, LabelScores};
use crate::dataset::{LabelSet, Template};
use crate::prompt::{render_prompt, ContextPrompt};
use crate::sampling::{sample_random_text, BagOfWords, WordList, WordSource};

/// Lower bound applied to prior entries before division.
pub const PRIOR_FLOOR: f64 = 1e-12;
pub const DEFAULT_CC_TOKEN: &str = "N/A";
pub const DEFAULT_M: usize = 20;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{method} needs {needed} as its word source")]
    SourceMismatch {
        method: Method,
        needed: &'static str,
    },
    #[error("dimension mismatch: {expected} labels vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("method `none` has no prior")]
    NoPrior,
    #[error("at least one content-free sample is required")]
    NoSamples,
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
}

/// Which prediction rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "cc")]
    Cc,
    #[serde(rename = "dc-eng")]
    DcEnglish,
    #[serde(rename = "dc-id")]
    DcInDomain,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::None,
        Method::Cc,
        Method::DcEnglish,
        Method::DcInDomain,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Cc => "cc",
            Method::DcEnglish => "dc-eng",
            Method::DcInDomain => "dc-id",
        }
    }

    pub fn mode(&self) -> Option<PriorMode> {
        match self {
            Method::None => None,
            Method::Cc => Some(PriorMode::CcToken),
            Method::DcEnglish => Some(PriorMode::DcEnglish),
            Method::DcInDomain => Some(PriorMode::DcInDomain),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected none, cc, dc-eng or dc-id)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorMode {
    #[serde(rename = "cc_token")]
    CcToken,
    #[serde(rename = "dc_english")]
    DcEnglish,
    #[serde(rename = "dc_indomain")]
    DcInDomain,
}

/// How to build the content-free inputs for one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CalibrationMethod {
    pub method: Method,
    /// Placeholder text for `cc`.
    pub cc_token: String,
    /// Number of random texts; forced to 1 for `cc`.
    pub m: usize,
    /// Words per random text. For `cc`, repeats the token this many times.
    pub length_override: Option<usize>,
}

impl CalibrationMethod {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            cc_token: DEFAULT_CC_TOKEN.to_string(),
            m: DEFAULT_M,
            length_override: None,
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_length(mut self, length: Option<usize>) -> Self {
        self.length_override = length;
        self
    }

    pub fn with_cc_token(mut self, token: impl Into<String>) -> Self {
        self.cc_token = token.into();
        self
    }

    pub fn effective_m(&self) -> usize {
        match self.method {
            Method::Cc => 1,
            _ => self.m,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum CalibrationSource<'a> {
    Bag(&'a BagOfWords),
    Words(&'a WordList),
}

impl CalibrationSource<'_> {
    fn words(&self) -> &dyn WordSource {
        match self {
            CalibrationSource::Bag(b) => *b,
            CalibrationSource::Words(w) => *w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEstimate {
    pub prior: Vec<f64>,
    pub mode: PriorMode,
    pub m: usize,
    pub length: usize,
    pub context_seed: u64,
}

impl PriorEstimate {
    pub fn new(
        prior: Vec<f64>,
        mode: PriorMode,
        m: usize,
        length: usize,
        context_seed: u64,
    ) -> Result<Self, CalibrationError> {
        if m == 0 {
            return Err(CalibrationError::NoSamples);
        }
        if prior.is_empty() || prior.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(CalibrationError::InvalidPrior(format!("{prior:?}")));
        }
        let sum: f64 = prior.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CalibrationError::InvalidPrior(format!("sums to {sum}")));
        }
        Ok(Self {
            prior,
            mode,
            m,
            length,
            context_seed,
        })
    }
}

/// Arithmetic mean of probability vectors, reduced in input order.
pub fn mean_scores(samples: &[LabelScores]) -> Result<Vec<f64>, CalibrationError> {
    let first = samples.first().ok_or(CalibrationError::NoSamples)?;
    let n = first.len();
    let mut acc = vec![0.0; n];
    for s in samples {
        if s.len() != n {
            return Err(CalibrationError::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
        for (a, p) in acc.iter_mut().zip(s.probs()) {
            *a += p;
        }
    }
    let m = samples.len() as f64;
    Ok(acc.into_iter().map(|a| a / m).collect())
}

/// The content-free query texts for a method: the cc token (optionally
/// repeated), or `M` random texts of `length` words.
pub fn content_free_texts<R: Rng + ?Sized>(
    method: &CalibrationMethod,
    source: Option<CalibrationSource<'_>>,
    default_length: usize,
    rng: &mut R,
) -> Result<(Vec<String>, usize), CalibrationError> {
    match method.method {
        Method::None => Err(CalibrationError::NoPrior),
        Method::Cc => {
            let reps = method.length_override.unwrap_or(1).max(1);
            let text = vec![method.cc_token.as_str(); reps].join(" ");
            Ok((vec![text], reps))
        }
        Method::DcEnglish | Method::DcInDomain => {
            if method.m == 0 {
                return Err(CalibrationError::NoSamples);
            }
            let source = match (method.method, source) {
                (Method::DcInDomain, Some(s @ CalibrationSource::Bag(_))) => s,
                (Method::DcInDomain, _) => {
                    return Err(CalibrationError::SourceMismatch {
                        method: method.method,
                        needed: "an in-domain bag of words",
                    })
                }
                (_, Some(s)) => s,
                (_, None) => {
                    return Err(CalibrationError::SourceMismatch {
                        method: method.method,
                        needed: "a word list",
                    })
                }
            };
            let length = method.length_override.unwrap_or(default_length).max(1);
            let words = source.words();
            let texts = (0..method.m)
                .map(|_| sample_random_text(words, length, rng))
                .collect();
            Ok((texts, length))
        }
    }
}

/// Estimate the label prior for `context` by scoring content-free inputs.
#[allow(clippy::too_many_arguments)]
pub fn estimate_prior<R: Rng + ?Sized>(
    backend: &dyn Backend,
    template: &Template,
    context: &ContextPrompt,
    label_set: &LabelSet,
    method: &CalibrationMethod,
    source: Option<CalibrationSource<'_>>,
    default_length: usize,
    rng: &mut R,
) -> Result<PriorEstimate, CalibrationError> {
    let mode = method.method.mode().ok_or(CalibrationError::NoPrior)?;
    let (texts, length) = content_free_texts(method, source, default_length, rng)?;
    let prompts: Vec<String> = texts
        .iter()
        .map(|t| render_prompt(template, context, label_set, t))
        .collect();
    let scores = score_batch(backend, &prompts, label_set)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let prior = mean_scores(&scores)?;
    PriorEstimate::new(prior, mode, texts.len(), length, context.seed)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict_uncalibrated(scores: &LabelScores) -> usize {
    argmax(scores.probs())
}

/// `argmax_y probs[y] / max(prior[y], PRIOR_FLOOR)`; `prior` need not be
/// normalized.
pub fn calibrated_argmax(probs: &[f64], prior: &[f64]) -> Result<usize, CalibrationError> {
    if probs.len() != prior.len() {
        return Err(CalibrationError::DimensionMismatch {
            expected: probs.len(),
            got: prior.len(),
        });
    }
    let ratios: Vec<f64> = probs
        .iter()
        .zip(prior)
        .map(|(p, q)| p / q.max(PRIOR_FLOOR))
        .collect();
    Ok(argmax(&ratios))
}

pub fn calibrated_predict(
    scores: &LabelScores,
    prior: &PriorEstimate,
) -> Result<usize, CalibrationError> {
    calibrated_argmax(scores.probs(), &prior.prior)
}
