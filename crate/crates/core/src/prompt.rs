//! Context construction and prompt rendering.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetError, LabelSet, Template};
use crate::seed;

/// The k labeled exemplars placed before the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPrompt {
    pub exemplars: Vec<(String, usize)>,
    pub seed: u64,
    pub k: usize,
}

impl ContextPrompt {
    /// Zero-shot context.
    pub fn empty() -> Self {
        Self {
            exemplars: Vec::new(),
            seed: 0,
            k: 0,
        }
    }
}

/// Render `[instruction\n]exemplar(sep)exemplar(sep)...query`. The result ends
/// with the template's label prefix and no trailing space.
pub fn render_prompt(
    template: &Template,
    context: &ContextPrompt,
    label_set: &LabelSet,
    query_text: &str,
) -> String {
    let mut out = String::new();
    if let Some(instruction) = &template.instruction {
        out.push_str(instruction);
        out.push('\n');
    }
    for (text, label) in &context.exemplars {
        push_input(&mut out, template, text);
        out.push_str(&template.label_prefix);
        out.push(' ');
        out.push_str(label_set.name(*label));
        out.push_str(&template.pair_separator);
    }
    push_input(&mut out, template, query_text);
    out.push_str(&template.label_prefix);
    out
}

fn push_input(out: &mut String, template: &Template, text: &str) {
    out.push_str(&template.input_prefix);
    out.push(' ');
    out.push_str(text);
    out.push('\n');
}

/// Draw `k` labeled exemplars without replacement from the train pool.
/// Deterministic in `(dataset.id, k, seed)`; draw order is kept.
pub fn build_context(
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<ContextPrompt, DatasetError> {
    let pool: Vec<_> = dataset
        .train_pool
        .iter()
        .filter_map(|ex| ex.gold.map(|g| (ex.text.as_str(), g)))
        .collect();
    if pool.len() < k {
        return Err(DatasetError::PoolTooSmall {
            requested: k,
            available: pool.len(),
        });
    }
    let k_str = k.to_string();
    let mut rng = seed::rng(seed, "context", &[&dataset.id, &k_str]);
    let exemplars = index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| (pool[i].0.to_string(), pool[i].1))
        .collect();
    Ok(ContextPrompt { exemplars, seed, k })
}
