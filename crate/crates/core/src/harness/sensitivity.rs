use std::fmt::Write as _;

use serde::Serialize;

use super::{
    calibration_method, mean_std, predict_all, prepare, prior_for, score_seed, HarnessError,
    PriorInputs,
};
use crate::backend::Backend;
use crate::calibration::Method;
use crate::config::{GridValue, RunSpec, SweepAxis};
use crate::dataset::Dataset;
use crate::metrics::macro_f1;
use crate::sampling::WordList;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: GridValue,
    pub seed: u64,
    pub macro_f1: f64,
    pub prior: Vec<f64>,
}

/// Per-grid-point summary over seeds. `prior_var` is the per-label sample
/// variance of the prior estimate across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: GridValue,
    pub n_seeds: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub prior_mean: Vec<f64>,
    pub prior_var: Vec<f64>,
}

impl SweepPoint {
    /// Prior variance averaged over labels.
    pub fn mean_prior_var(&self) -> f64 {
        self.prior_var.iter().sum::<f64>() / self.prior_var.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub dataset: String,
    pub model_id: String,
    pub axis: SweepAxis,
    pub method: Method,
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    pub fn point(&self, value: GridValue) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.value == value)
    }

    pub fn rows_csv(&self) -> String {
        let mut out = String::from("dataset,axis,value,seed,method,macro_f1,prior\n");
        for r in &self.rows {
            let prior: Vec<String> = r.prior.iter().map(f64::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.dataset,
                self.axis.as_str(),
                r.value,
                r.seed,
                self.method,
                r.macro_f1,
                prior.join(";")
            );
        }
        out
    }

    pub fn points_csv(&self) -> String {
        let mut out = String::from("dataset,axis,value,method,n_seeds,mean_f1,std_f1,prior_var\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.dataset,
                self.axis.as_str(),
                p.value,
                self.method,
                p.n_seeds,
                p.mean_f1,
                p.std_f1,
                p.mean_prior_var()
            );
        }
        out
    }
}

/// Vary one calibration knob over `grid` and report macro-F1 per seed.
/// The in-domain estimator is swept for sample count and corpus size, the
/// English one for text length. Every other setting comes from `spec`, so
/// a grid point equal to the spec's own value reproduces the eval cell.
pub fn run_sensitivity(
    spec: &RunSpec,
    dataset: &Dataset,
    backend: &dyn Backend,
    wordlist: &WordList,
    axis: SweepAxis,
    grid: &[GridValue],
    seeds: &[u64],
) -> Result<SweepTable, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Invalid("sweep grid is empty".into()));
    }
    if seeds.is_empty() {
        return Err(HarnessError::Invalid(
            "at least one seed is required".into(),
        ));
    }
    if axis == SweepAxis::MSamples && grid.contains(&GridValue::Full) {
        return Err(HarnessError::Invalid(
            "`full` is not a valid sample count".into(),
        ));
    }
    let method = match axis {
        SweepAxis::CalLength => Method::DcEnglish,
        SweepAxis::MSamples | SweepAxis::CorpusSize => Method::DcInDomain,
    };
    let prep = prepare(spec, dataset)?;
    let n_classes = prep.dataset.label_set.len();

    let mut rows = Vec::with_capacity(grid.len() * seeds.len());
    for &seed in seeds {
        let scored = score_seed(&prep, spec.k, seed, backend)?;
        for &value in grid {
            let mut cm = calibration_method(spec, method);
            let mut corpus_cap = spec.corpus_cap;
            let count = match value {
                GridValue::Count(n) => Some(n),
                GridValue::Full => None,
            };
            match axis {
                SweepAxis::MSamples => cm = cm.with_m(count.expect("checked above")),
                SweepAxis::CorpusSize => corpus_cap = count,
                SweepAxis::CalLength => cm = cm.with_length(count),
            }
            let inputs = PriorInputs {
                backend,
                wordlist,
                corpus_cap,
            };
            let prior =
                prior_for(&prep, &scored.context, &cm, seed, &inputs)?.expect("calibrating method");
            let preds = predict_all(&scored.scores, Some(&prior))?;
            rows.push(SweepRow {
                value,
                seed,
                macro_f1: macro_f1(&preds, &prep.golds, n_classes)?,
                prior: prior.prior,
            });
        }
    }

    let points = grid
        .iter()
        .map(|&value| {
            let at: Vec<&SweepRow> = rows.iter().filter(|r| r.value == value).collect();
            let f1s: Vec<f64> = at.iter().map(|r| r.macro_f1).collect();
            let (mean_f1, std_f1) = mean_std(&f1s);
            let (prior_mean, prior_var) = (0..n_classes)
                .map(|y| {
                    let col: Vec<f64> = at.iter().map(|r| r.prior[y]).collect();
                    let (m, s) = mean_std(&col);
                    (m, s * s)
                })
                .unzip();
            SweepPoint {
                value,
                n_seeds: at.len(),
                mean_f1,
                std_f1,
                prior_mean,
                prior_var,
            }
        })
        .collect();

    Ok(SweepTable {
        dataset: dataset.id.clone(),
        model_id: backend.model_id().to_string(),
        axis,
        method,
        rows,
        points,
    })
}
