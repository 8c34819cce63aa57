//! A synthetic binary task with a known domain-label bias, paired with the
//! mock association table that produces it.
//!
//! Every domain word pushes its own class by `signal / text_len` and the
//! offset-favored class by `offset / text_len`, so a text of `text_len`
//! gold-class words scores `(signal, offset)` beyond the base, and a random
//! text drawn from the corpus carries the full domain offset on average.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;

use crate::backend::AssociationTable;
use crate::dataset::{Dataset, Example, LabelSet, Template};
use crate::seed;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub id: String,
    pub n_eval: usize,
    pub n_train: usize,
    pub vocab_per_class: usize,
    pub text_len: usize,
    /// Text-level logit toward the gold class.
    pub signal: f64,
    /// Text-level logit added to `favored` by in-domain words.
    pub offset: f64,
    pub favored: usize,
    /// Probability that a word comes from the gold class vocabulary.
    pub purity: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            id: "synthetic_hate".into(),
            n_eval: 200,
            n_train: 64,
            vocab_per_class: 40,
            text_len: 20,
            signal: 1.0,
            offset: 19f64.ln(),
            favored: 1,
            purity: 1.0,
            seed: 0,
        }
    }
}

pub const LABELS: [&str; 2] = ["neutral", "hate"];

pub fn class_word(class: usize, i: usize) -> String {
    format!("c{class}w{i}")
}

/// Parse a word produced by [`class_word`] back to its class.
pub fn word_class(word: &str) -> Option<usize> {
    let rest = word.strip_prefix('c')?;
    let (class, idx) = rest.split_once('w')?;
    idx.parse::<usize>().ok()?;
    class.parse().ok()
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub dataset: Dataset,
    pub table: AssociationTable,
}

impl SyntheticSpec {
    pub fn build(&self) -> SyntheticTask {
        let mut rng = seed::rng(self.seed, "synthetic", &[&self.id]);
        let text = |gold: usize, rng: &mut seed::Rng| -> String {
            (0..self.text_len)
                .map(|_| {
                    let class = if rng.random_bool(self.purity) {
                        gold
                    } else {
                        1 - gold
                    };
                    class_word(class, rng.random_range(0..self.vocab_per_class))
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let examples: Vec<Example> = (0..self.n_eval)
            .map(|i| Example::labeled(text(i % 2, &mut rng), i % 2))
            .collect();
        let train: Vec<Example> = (0..self.n_train)
            .map(|i| Example::labeled(text(i % 2, &mut rng), i % 2))
            .collect();
        let dataset = Dataset::new(
            self.id.clone(),
            examples,
            train,
            LabelSet::new(LABELS).expect("static labels"),
            Template::new("Tweet:", "Label:"),
        )
        .expect("synthetic dataset is valid");

        let per_word = 1.0 / self.text_len as f64;
        let mut assoc = BTreeMap::new();
        for class in 0..2 {
            for i in 0..self.vocab_per_class {
                let mut w = vec![0.0; 2];
                w[class] += self.signal * per_word;
                w[self.favored] += self.offset * per_word;
                assoc.insert(class_word(class, i), w);
            }
        }
        let table = AssociationTable::new(vec![0.0, 0.0], assoc).expect("finite weights");
        SyntheticTask { dataset, table }
    }
}

impl SyntheticTask {
    /// Write `<id>.toml`, `<id>.jsonl`, `<id>.train.jsonl` and the mock table
    /// `<id>.mock.json` (model id `model`) into `dir`.
    pub fn write_to(&self, dir: &Path, model: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let ds = &self.dataset;
        let labels = ds.label_set.names();
        let config = format!(
            "id = {:?}\nlabels = {:?}\ninput_prefix = {:?}\nlabel_prefix = {:?}\n",
            ds.id, labels, ds.template.input_prefix, ds.template.label_prefix
        );
        fs::write(dir.join(format!("{}.toml", ds.id)), config)?;
        let jsonl = |examples: &[Example]| -> String {
            examples
                .iter()
                .map(|e| {
                    let label = e.gold.map(|g| labels[g].as_str());
                    serde_json::json!({"text": e.text, "label": label}).to_string() + "\n"
                })
                .collect()
        };
        fs::write(dir.join(format!("{}.jsonl", ds.id)), jsonl(&ds.examples))?;
        fs::write(
            dir.join(format!("{}.train.jsonl", ds.id)),
            jsonl(&ds.train_pool),
        )?;
        let table = serde_json::json!({
            "model": model,
            "base": self.table.base,
            "assoc": self.table.assoc,
        });
        let mut raw = serde_json::to_string_pretty(&table)?;
        raw.push('\n');
        fs::write(dir.join(format!("{}.mock.json", ds.id)), raw)
    }
}
