//! Task description types: label sets, examples, templates and datasets,
//! plus ingestion from a JSONL data file and a TOML dataset config.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("label set must not be empty")]
    EmptyLabelSet,
    #[error("duplicate label name {0:?}")]
    DuplicateLabel(String),
    #[error("label name {0:?} must be a single non-empty word")]
    InvalidLabel(String),
    #[error("label override has {got} names but the dataset has {expected} classes")]
    LabelArity { expected: usize, got: usize },
    #[error("gold label index {index} out of range for {n_labels} labels")]
    GoldOutOfRange { index: usize, n_labels: usize },
    #[error("dataset {0:?} has no examples")]
    Empty(String),
    #[error("{path}:{line}: unknown label {label:?}")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },
    #[error("{path}:{line}: malformed record: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: invalid dataset config: {source}")]
    Config {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("train pool has {available} examples but {requested} exemplars were requested")]
    PoolTooSmall { requested: usize, available: usize },
}

/// Ordered label verbalizations. The position of a name is its class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new<I, S>(names: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DatasetError::EmptyLabelSet);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(DatasetError::InvalidLabel(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateLabel(name.clone()));
            }
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Replace the verbalizations while keeping class indices.
    pub fn renamed<I, S>(&self, names: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let renamed = Self::new(names)?;
        if renamed.len() != self.len() {
            return Err(DatasetError::LabelArity {
                expected: self.len(),
                got: renamed.len(),
            });
        }
        Ok(renamed)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    pub gold: Option<usize>,
}

impl Example {
    pub fn labeled(text: impl Into<String>, gold: usize) -> Self {
        Self {
            text: text.into(),
            gold: Some(gold),
        }
    }

    pub fn unlabeled(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            gold: None,
        }
    }
}

pub const DEFAULT_PAIR_SEPARATOR: &str = "\n\n";

/// Prompt layout. An exemplar renders as
/// `{input_prefix} {text}\n{label_prefix} {label}`; the query stops right
/// after `label_prefix`, so the scored continuation is `" " + label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub input_prefix: String,
    pub label_prefix: String,
    #[serde(default = "default_pair_separator")]
    pub pair_separator: String,
    #[serde(default)]
    pub instruction: Option<String>,
}

fn default_pair_separator() -> String {
    DEFAULT_PAIR_SEPARATOR.to_string()
}

impl Template {
    pub fn new(input_prefix: impl Into<String>, label_prefix: impl Into<String>) -> Self {
        Self {
            input_prefix: input_prefix.into(),
            label_prefix: label_prefix.into(),
            pair_separator: default_pair_separator(),
            instruction: None,
        }
    }

    pub fn with_instruction(mut self, instruction: impl Into<String>) -> Self {
        self.instruction = Some(instruction.into());
        self
    }

    pub fn with_pair_separator(mut self, separator: impl Into<String>) -> Self {
        self.pair_separator = separator.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: String,
    pub examples: Vec<Example>,
    pub train_pool: Vec<Example>,
    pub label_set: LabelSet,
    pub template: Template,
}

impl Dataset {
    pub fn new(
        id: impl Into<String>,
        examples: Vec<Example>,
        train_pool: Vec<Example>,
        label_set: LabelSet,
        template: Template,
    ) -> Result<Self, DatasetError> {
        let id = id.into();
        if examples.is_empty() {
            return Err(DatasetError::Empty(id));
        }
        let n_labels = label_set.len();
        for ex in examples.iter().chain(train_pool.iter()) {
            if let Some(index) = ex.gold {
                if index >= n_labels {
                    return Err(DatasetError::GoldOutOfRange { index, n_labels });
                }
            }
        }
        Ok(Self {
            id,
            examples,
            train_pool,
            label_set,
            template,
        })
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.text.as_str())
    }

    /// Same dataset with different label verbalizations.
    pub fn with_label_names(&self, names: &[String]) -> Result<Self, DatasetError> {
        Ok(Self {
            label_set: self.label_set.renamed(names.iter().cloned())?,
            ..self.clone()
        })
    }
}

/// On-disk dataset config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub labels: Vec<String>,
    pub input_prefix: String,
    pub label_prefix: String,
    #[serde(default = "default_pair_separator")]
    pub pair_separator: String,
    #[serde(default)]
    pub instruction: Option<String>,
    /// Evaluation file, relative to the config file.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Exemplar pool file, relative to the config file.
    #[serde(default)]
    pub train: Option<PathBuf>,
}

impl DatasetConfig {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let raw = read(path)?;
        toml::from_str(&raw).map_err(|source| DatasetError::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn template(&self) -> Template {
        Template {
            input_prefix: self.input_prefix.clone(),
            label_prefix: self.label_prefix.clone(),
            pair_separator: self.pair_separator.clone(),
            instruction: self.instruction.clone(),
        }
    }
}

#[derive(Deserialize)]
struct Record {
    text: String,
    #[serde(default)]
    label: Option<String>,
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse a JSONL file of `{"text": .., "label": ..}` records. Labels are
/// matched exactly against `labels`.
pub fn read_examples(path: &Path, labels: &LabelSet) -> Result<Vec<Example>, DatasetError> {
    let raw = read(path)?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|source| DatasetError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        let gold = match record.label {
            Some(label) => {
                Some(
                    labels
                        .index_of(&label)
                        .ok_or_else(|| DatasetError::UnknownLabel {
                            path: path.to_path_buf(),
                            line: i + 1,
                            label,
                        })?,
                )
            }
            None => None,
        };
        out.push(Example {
            text: record.text,
            gold,
        });
    }
    Ok(out)
}

/// Load an evaluation file against a dataset config. The train pool is left
/// empty; see [`load_dataset_with_train`].
pub fn load_dataset(data_path: &Path, config_path: &Path) -> Result<Dataset, DatasetError> {
    load_dataset_with_train(data_path, None, config_path)
}

pub fn load_dataset_with_train(
    data_path: &Path,
    train_path: Option<&Path>,
    config_path: &Path,
) -> Result<Dataset, DatasetError> {
    let config = DatasetConfig::load(config_path)?;
    let label_set = LabelSet::new(config.labels.iter().cloned())?;
    let examples = read_examples(data_path, &label_set)?;
    let train_pool = match train_path {
        Some(p) => read_examples(p, &label_set)?,
        None => Vec::new(),
    };
    Dataset::new(
        config.id.clone(),
        examples,
        train_pool,
        label_set,
        config.template(),
    )
}

/// Resolve a dataset by id inside `dir`: `<id>.toml` is the config; the
/// evaluation file is the config's `data` entry or `<id>.jsonl`; the train
/// pool is the config's `train` entry or `<id>.train.jsonl` when present.
pub fn load_dataset_by_id(dir: &Path, id: &str) -> Result<Dataset, DatasetError> {
    let config_path = dir.join(format!("{id}.toml"));
    let config = DatasetConfig::load(&config_path)?;
    let base = config_path.parent().unwrap_or(dir);
    let data = config
        .data
        .as_ref()
        .map(|p| base.join(p))
        .unwrap_or_else(|| dir.join(format!("{id}.jsonl")));
    let train = config.train.as_ref().map(|p| base.join(p)).or_else(|| {
        let p = dir.join(format!("{id}.train.jsonl"));
        p.exists().then_some(p)
    });
    load_dataset_with_train(&data, train.as_deref(), &config_path)
}
