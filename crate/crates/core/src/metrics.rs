//! Domain-label bias, bias tiers, Macro-F1, prediction distributions and
//! cross-model bias correlation.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Backend;
use crate::calibration::{
    estimate_prior, CalibrationError, CalibrationMethod, CalibrationSource, Method,
};
use crate::dataset::Dataset;
use crate::prompt::ContextPrompt;
use crate::sampling::{avg_length, build_bag, SamplingError, WordList};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("predictions ({preds}) and golds ({golds}) differ in length")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("label index {index} out of range for {n_classes} classes")]
    IndexOutOfRange { index: usize, n_classes: usize },
    #[error("series must be aligned by dataset id: {0}")]
    Misaligned(String),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Half the L1 distance between two label distributions.
pub fn bias_from_priors(p_eng: &[f64], p_id: &[f64]) -> f64 {
    let d: f64 = p_eng.iter().zip(p_id).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * d).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScore {
    pub value: f64,
    pub dataset_id: String,
    pub model_id: String,
    /// Words per random text.
    pub length: usize,
    pub n_samples: usize,
    pub p_eng: Vec<f64>,
    pub p_id: Vec<f64>,
}

/// Zero-shot priors from random English and random in-domain texts of the
/// dataset's average length, compared with [`bias_from_priors`].
pub fn domain_label_bias<R: Rng + ?Sized>(
    backend: &dyn Backend,
    dataset: &Dataset,
    wordlist: &WordList,
    n_samples: usize,
    rng: &mut R,
) -> Result<BiasScore, MetricsError> {
    if n_samples == 0 {
        return Err(MetricsError::NoSamples);
    }
    let length = avg_length(dataset.texts())?;
    let bag = build_bag(dataset.texts(), dataset.id.clone())?;
    let ctx = ContextPrompt::empty();
    let prior = |method, source, rng: &mut R| {
        estimate_prior(
            backend,
            &dataset.template,
            &ctx,
            &dataset.label_set,
            &CalibrationMethod::new(method).with_m(n_samples),
            Some(source),
            length,
            rng,
        )
    };
    let eng = prior(Method::DcEnglish, CalibrationSource::Words(wordlist), rng)?;
    let id = prior(Method::DcInDomain, CalibrationSource::Bag(&bag), rng)?;
    Ok(BiasScore {
        value: bias_from_priors(&eng.prior, &id.prior),
        dataset_id: dataset.id.clone(),
        model_id: backend.model_id().to_string(),
        length,
        n_samples,
        p_eng: eng.prior,
        p_id: id.prior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Small,
    Medium,
    Large,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Small => "small",
            Tier::Medium => "medium",
            Tier::Large => "large",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tiers {
    pub small: Vec<BiasScore>,
    pub medium: Vec<BiasScore>,
    pub large: Vec<BiasScore>,
}

impl Tiers {
    pub fn tier_of(&self, dataset_id: &str) -> Option<Tier> {
        [
            (Tier::Small, &self.small),
            (Tier::Medium, &self.medium),
            (Tier::Large, &self.large),
        ]
        .into_iter()
        .find(|(_, v)| v.iter().any(|s| s.dataset_id == dataset_id))
        .map(|(t, _)| t)
    }
}

/// Sizes of the three tiers for `n` items; the remainder goes to the
/// larger-bias end.
pub fn tier_sizes(n: usize) -> [usize; 3] {
    let (q, r) = (n / 3, n % 3);
    [q, q + usize::from(r >= 2), q + usize::from(r >= 1)]
}

/// Sort by bias (then dataset id) and split into three contiguous tiers.
pub fn stratify(scores: &[BiasScore]) -> Tiers {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
    });
    let [s, m, _] = tier_sizes(sorted.len());
    let large = sorted.split_off(s + m);
    let medium = sorted.split_off(s);
    Tiers {
        small: sorted,
        medium,
        large,
    }
}

fn check_indices(values: &[usize], n_classes: usize) -> Result<(), MetricsError> {
    match values.iter().find(|&&v| v >= n_classes) {
        Some(&index) => Err(MetricsError::IndexOutOfRange { index, n_classes }),
        None => Ok(()),
    }
}

/// Unweighted mean of per-class F1 over all `n_classes` classes. A class
/// with no true positives scores 0, including classes absent from both.
pub fn macro_f1(preds: &[usize], golds: &[usize], n_classes: usize) -> Result<f64, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    check_indices(preds, n_classes)?;
    check_indices(golds, n_classes)?;
    if n_classes == 0 {
        return Ok(0.0);
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &g) in preds.iter().zip(golds) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let total: f64 = (0..n_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDistribution {
    pub counts: Vec<usize>,
    /// `None` when there are no predictions.
    pub fractions: Option<Vec<f64>>,
}

pub fn prediction_distribution(
    preds: &[usize],
    n_classes: usize,
) -> Result<PredictionDistribution, MetricsError> {
    check_indices(preds, n_classes)?;
    let mut counts = vec![0usize; n_classes];
    for &p in preds {
        counts[p] += 1;
    }
    let fractions = (!preds.is_empty()).then(|| {
        let n = preds.len() as f64;
        counts.iter().map(|&c| c as f64 / n).collect()
    });
    Ok(PredictionDistribution { counts, fractions })
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Misaligned(format!(
            "lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(MetricsError::Misaligned(
            "need at least two datasets".into(),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlate two models' bias scores over the same datasets.
pub fn bias_correlation(
    scores_a: &[BiasScore],
    scores_b: &[BiasScore],
) -> Result<f64, MetricsError> {
    let sorted = |s: &[BiasScore]| {
        let mut v: Vec<(String, f64)> = s.iter().map(|b| (b.dataset_id.clone(), b.value)).collect();
        v.sort_by(|x, y| x.0.cmp(&y.0));
        v
    };
    let (a, b) = (sorted(scores_a), sorted(scores_b));
    let ids_a: Vec<_> = a.iter().map(|x| &x.0).collect();
    let ids_b: Vec<_> = b.iter().map(|x| &x.0).collect();
    if ids_a != ids_b {
        return Err(MetricsError::Misaligned(format!("{ids_a:?} vs {ids_b:?}")));
    }
    let va: Vec<f64> = a.iter().map(|x| x.1).collect();
    let vb: Vec<f64> = b.iter().map(|x| x.1).collect();
    pearson(&va, &vb)
}
