//! Run configuration. A TOML run file and command-line flags share one
//! partial shape ([`RunFile`]); flags win over the file, the file wins over
//! built-in defaults, and [`RunFile::resolve`] produces the effective
//! [`RunSpec`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendConfig, BackendKind, DEFAULT_API_KEY_ENV};
use crate::calibration::{Method, DEFAULT_CC_TOKEN, DEFAULT_M};

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_EVAL_CAP: usize = 500;
pub const DEFAULT_BIAS_SAMPLES: usize = 20;
pub const DEFAULT_REMOTE_CACHE_DIR: &str = ".biascal-cache";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Sweep axis for sensitivity runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum SweepAxis {
    MSamples,
    CorpusSize,
    CalLength,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::MSamples => "m_samples",
            SweepAxis::CorpusSize => "corpus_size",
            SweepAxis::CalLength => "cal_length",
        }
    }
}

/// One point on a sweep grid. `Full` means "no cap" on the corpus axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GridValue {
    Count(usize),
    Full,
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Count(n) => write!(f, "{n}"),
            GridValue::Full => f.write_str("full"),
        }
    }
}

impl FromStr for GridValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(GridValue::Full);
        }
        s.parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(GridValue::Count)
            .ok_or_else(|| format!("grid values must be positive integers or `full`, got {s:?}"))
    }
}

impl Serialize for GridValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GridValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => GridValue::from_str(&n.to_string()),
            Raw::S(s) => GridValue::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendFile {
    pub kind: Option<BackendKind>,
    pub endpoint: Option<String>,
    /// One backend per model (remote) or per table (mock).
    pub models: Option<Vec<String>>,
    pub mock_tables: Option<Vec<PathBuf>>,
    pub timeout_secs: Option<u64>,
    pub parallelism: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: Option<bool>,
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityFile {
    pub dataset: Option<String>,
    pub axis: Option<SweepAxis>,
    pub grid: Option<Vec<GridValue>>,
}

/// Partial run configuration, as read from a file or assembled from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub datasets: Option<Vec<String>>,
    pub data_dir: Option<PathBuf>,
    pub methods: Option<Vec<Method>>,
    pub k: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub m_samples: Option<usize>,
    pub eval_cap: Option<usize>,
    pub cc_token: Option<String>,
    pub cal_length: Option<usize>,
    pub wordlist: Option<PathBuf>,
    pub label_names: Option<Vec<String>>,
    pub corpus_cap: Option<usize>,
    pub bias_samples: Option<usize>,
    pub bias_seed: Option<u64>,
    pub subset_seed: Option<u64>,
    pub with_bias: Option<bool>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendFile,
    #[serde(default)]
    pub sensitivity: SensitivityFile,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl RunFile {
    /// Parse a run file; relative paths inside it are anchored at the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut file: RunFile = toml::from_str(&raw).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        file.anchor_paths(base);
        Ok(file)
    }

    fn anchor_paths(&mut self, base: &Path) {
        let anchor = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        anchor(&mut self.data_dir);
        anchor(&mut self.wordlist);
        anchor(&mut self.out_dir);
        anchor(&mut self.backend.cache_dir);
        if let Some(tables) = &mut self.backend.mock_tables {
            for t in tables.iter_mut() {
                if t.is_relative() {
                    *t = base.join(&*t);
                }
            }
        }
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: &RunFile) -> Self {
        overlay!(
            self,
            over,
            datasets,
            data_dir,
            methods,
            k,
            seeds,
            m_samples,
            eval_cap,
            cc_token,
            cal_length,
            wordlist,
            label_names,
            corpus_cap,
            bias_samples,
            bias_seed,
            subset_seed,
            with_bias,
            out_dir,
        );
        overlay!(
            self.backend,
            over.backend,
            kind,
            endpoint,
            models,
            mock_tables,
            timeout_secs,
            parallelism,
            cache_dir,
            no_cache,
            api_key_env,
        );
        overlay!(self.sensitivity, over.sensitivity, dataset, axis, grid);
        self
    }

    pub fn resolve(&self) -> Result<RunSpec, ConfigError> {
        let defaults = BackendConfig::default();
        let b = &self.backend;
        let kind = b.kind.unwrap_or(defaults.kind);
        let cache_dir = if b.no_cache.unwrap_or(false) {
            None
        } else {
            b.cache_dir.clone().or_else(|| {
                (kind == BackendKind::Remote).then(|| PathBuf::from(DEFAULT_REMOTE_CACHE_DIR))
            })
        };
        let template = BackendConfig {
            kind,
            endpoint: b.endpoint.clone(),
            model: None,
            mock_table: None,
            timeout_secs: b.timeout_secs.unwrap_or(defaults.timeout_secs),
            parallelism: b.parallelism.unwrap_or(defaults.parallelism),
            cache_dir,
            api_key_env: b
                .api_key_env
                .clone()
                .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string()),
        };
        let backends: Vec<BackendConfig> = match kind {
            BackendKind::Remote => {
                let models = b.models.clone().unwrap_or_default();
                if models.is_empty() {
                    return Err(ConfigError::Invalid(
                        "remote backend requires --model".into(),
                    ));
                }
                models
                    .into_iter()
                    .map(|m| BackendConfig {
                        model: Some(m),
                        ..template.clone()
                    })
                    .collect()
            }
            BackendKind::Mock => {
                let tables = b.mock_tables.clone().unwrap_or_default();
                let models = b.models.clone().unwrap_or_default();
                if tables.is_empty() {
                    vec![BackendConfig {
                        model: models.first().cloned(),
                        ..template.clone()
                    }]
                } else {
                    tables
                        .into_iter()
                        .enumerate()
                        .map(|(i, t)| BackendConfig {
                            mock_table: Some(t),
                            model: models.get(i).cloned(),
                            ..template.clone()
                        })
                        .collect()
                }
            }
        };
        for cfg in &backends {
            cfg.validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }

        let mut methods = self.methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
        let mut seen = std::collections::HashSet::new();
        methods.retain(|m| seen.insert(*m));

        let spec = RunSpec {
            datasets: self.datasets.clone().unwrap_or_default(),
            data_dir: self.data_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            methods,
            k: self.k.unwrap_or(DEFAULT_K),
            seeds: self.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec()),
            m_samples: self.m_samples.unwrap_or(DEFAULT_M),
            eval_cap: self.eval_cap.unwrap_or(DEFAULT_EVAL_CAP),
            cc_token: self
                .cc_token
                .clone()
                .unwrap_or_else(|| DEFAULT_CC_TOKEN.to_string()),
            cal_length: self.cal_length,
            wordlist: self.wordlist.clone(),
            label_names: self.label_names.clone(),
            corpus_cap: self.corpus_cap,
            bias_samples: self.bias_samples.unwrap_or(DEFAULT_BIAS_SAMPLES),
            bias_seed: self.bias_seed.unwrap_or(0),
            subset_seed: self.subset_seed.unwrap_or(0),
            with_bias: self.with_bias.unwrap_or(true),
            backends,
            out_dir: self
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("reports")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub datasets: Vec<String>,
    pub data_dir: PathBuf,
    pub methods: Vec<Method>,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub m_samples: usize,
    pub eval_cap: usize,
    pub cc_token: String,
    pub cal_length: Option<usize>,
    pub wordlist: Option<PathBuf>,
    pub label_names: Option<Vec<String>>,
    pub corpus_cap: Option<usize>,
    pub bias_samples: usize,
    pub bias_seed: u64,
    pub subset_seed: u64,
    pub with_bias: bool,
    pub backends: Vec<BackendConfig>,
    /// Where reports go; not part of the experiment identity.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl RunSpec {
    /// Defaults with the given datasets and a single backend.
    pub fn new(datasets: Vec<String>, backend: BackendConfig) -> Self {
        Self {
            datasets,
            data_dir: PathBuf::from("."),
            methods: Method::ALL.to_vec(),
            k: DEFAULT_K,
            seeds: DEFAULT_SEEDS.to_vec(),
            m_samples: DEFAULT_M,
            eval_cap: DEFAULT_EVAL_CAP,
            cc_token: DEFAULT_CC_TOKEN.to_string(),
            cal_length: None,
            wordlist: None,
            label_names: None,
            corpus_cap: None,
            bias_samples: DEFAULT_BIAS_SAMPLES,
            bias_seed: 0,
            subset_seed: 0,
            with_bias: true,
            backends: vec![backend],
            out_dir: PathBuf::from("reports"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.seeds.is_empty() {
            return fail("at least one seed is required");
        }
        if self.eval_cap == 0 {
            return fail("eval_cap must be at least 1");
        }
        if self.methods.is_empty() {
            return fail("at least one method is required");
        }
        if self.m_samples == 0 {
            return fail("m_samples must be at least 1");
        }
        if self.bias_samples == 0 {
            return fail("bias_samples must be at least 1");
        }
        if self.cal_length == Some(0) {
            return fail("cal_length must be at least 1");
        }
        if self.corpus_cap == Some(0) {
            return fail("corpus_cap must be at least 1");
        }
        if self.backends.is_empty() {
            return fail("no backend configured");
        }
        Ok(())
    }

    pub fn backend(&self) -> &BackendConfig {
        &self.backends[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let spec = RunFile::default().resolve().unwrap();
        assert_eq!(spec.k, 8);
        assert_eq!(spec.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(spec.m_samples, 20);
        assert_eq!(spec.eval_cap, 500);
        assert_eq!(spec.methods, Method::ALL.to_vec());
        assert_eq!(spec.backend().kind, BackendKind::Mock);
        assert_eq!(spec.backend().cache_dir, None);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            r#"
datasets = ["a"]
data_dir = "data"
k = 4
seeds = [9]
methods = ["none", "dc-id", "none"]
[backend]
kind = "remote"
endpoint = "http://localhost:8000"
models = ["m1", "m2"]
[sensitivity]
axis = "corpus_size"
grid = [10, "full"]
"#,
        )
        .unwrap();
        let file = RunFile::load(&path).unwrap();
        assert_eq!(file.data_dir, Some(dir.path().join("data")));
        assert_eq!(
            file.sensitivity.grid,
            Some(vec![GridValue::Count(10), GridValue::Full])
        );
        let flags = RunFile {
            k: Some(0),
            ..RunFile::default()
        };
        let spec = file.overlay(&flags).resolve().unwrap();
        assert_eq!(spec.k, 0);
        assert_eq!(spec.seeds, vec![9]);
        assert_eq!(spec.methods, vec![Method::None, Method::DcInDomain]);
        assert_eq!(spec.backends.len(), 2);
        assert_eq!(spec.backends[1].model.as_deref(), Some("m2"));
        assert_eq!(
            spec.backend().cache_dir,
            Some(PathBuf::from(DEFAULT_REMOTE_CACHE_DIR))
        );
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: RunFile| f.resolve().is_err();
        assert!(bad(RunFile {
            seeds: Some(vec![]),
            ..Default::default()
        }));
        assert!(bad(RunFile {
            eval_cap: Some(0),
            ..Default::default()
        }));
        assert!(bad(RunFile {
            backend: BackendFile {
                kind: Some(BackendKind::Remote),
                ..Default::default()
            },
            ..Default::default()
        }));
        let err = toml::from_str::<RunFile>("bogus = 1").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!("0".parse::<GridValue>().is_err());
    }
}
