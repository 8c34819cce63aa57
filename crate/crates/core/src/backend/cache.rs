//! On-disk score cache: one JSON file per (backend kind, model, prompt,
//! label names) key. Cache I/O failures are logged and never fatal.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, ScoreResult};
use crate::dataset::LabelSet;

pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    version: u32,
    labels: Vec<String>,
    log_scores: Vec<f64>,
}

pub fn cache_key(kind: &str, model: &str, prompt: &str, labels: &LabelSet) -> String {
    let mut h = Sha256::new();
    for part in [kind, model, prompt] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update((labels.len() as u64).to_le_bytes());
    for name in labels.names() {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub struct CachedBackend {
    inner: Arc<dyn Backend>,
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl CachedBackend {
    pub fn new(inner: Arc<dyn Backend>, dir: PathBuf) -> Self {
        Self {
            inner,
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lookup(&self, prompt: &str, labels: &LabelSet) -> (String, Option<Vec<f64>>) {
        let key = cache_key(self.inner.kind(), self.inner.model_id(), prompt, labels);
        let path = self.path_for(&key);
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return (key, None),
            Err(e) => {
                log::warn!("cache read {}: {e}", path.display());
                return (key, None);
            }
        };
        match serde_json::from_slice::<Entry>(&raw) {
            Ok(entry)
                if entry.version == CACHE_FORMAT_VERSION
                    && entry.labels == labels.names()
                    && entry.log_scores.len() == labels.len()
                    && entry.log_scores.iter().all(|x| x.is_finite()) =>
            {
                (key, Some(entry.log_scores))
            }
            _ => {
                log::warn!("discarding corrupt cache entry {}", path.display());
                (key, None)
            }
        }
    }

    fn store(&self, key: &str, labels: &LabelSet, log_scores: &[f64]) {
        let entry = Entry {
            version: CACHE_FORMAT_VERSION,
            labels: labels.names().to_vec(),
            log_scores: log_scores.to_vec(),
        };
        if let Err(e) = self.write_atomic(key, &entry) {
            log::warn!("cache write {}: {e}", self.path_for(key).display());
        }
    }

    // Write to a unique temp file then rename, so concurrent writers of one
    // key never leave a torn entry.
    fn write_atomic(&self, key: &str, entry: &Entry) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec(entry)?)?;
        }
        fs::rename(&tmp, self.path_for(key)).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })
    }
}

impl Backend for CachedBackend {
    fn kind(&self) -> &str {
        self.inner.kind()
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn log_scores(&self, prompt: &str, labels: &LabelSet) -> ScoreResult {
        self.log_scores_batch(&[prompt.to_string()], labels)
            .pop()
            .expect("one result per prompt")
    }

    fn log_scores_batch(&self, prompts: &[String], labels: &LabelSet) -> Vec<ScoreResult> {
        let mut out: Vec<Option<ScoreResult>> = vec![None; prompts.len()];
        let mut missing = Vec::new();
        let mut missing_keys = Vec::new();
        for (i, prompt) in prompts.iter().enumerate() {
            let (key, hit) = self.lookup(prompt, labels);
            match hit {
                Some(scores) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    out[i] = Some(Ok(scores));
                }
                None => {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    missing.push(i);
                    missing_keys.push(key);
                }
            }
        }
        if !missing.is_empty() {
            let to_score: Vec<String> = missing.iter().map(|&i| prompts[i].clone()).collect();
            let scored = self.inner.log_scores_batch(&to_score, labels);
            for ((i, key), result) in missing.into_iter().zip(&missing_keys).zip(scored) {
                if let Ok(scores) = &result {
                    self.store(key, labels, scores);
                }
                out[i] = Some(result);
            }
        }
        out.into_iter().map(|r| r.expect("filled")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

impl CacheStats {
    pub fn collect(dir: &Path) -> std::io::Result<Self> {
        let mut stats = CacheStats {
            entries: 0,
            bytes: 0,
        };
        if !dir.exists() {
            return Ok(stats);
        }
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            if is_entry_file(&entry.path()) {
                stats.entries += 1;
                stats.bytes += entry.metadata()?.len();
            }
        }
        Ok(stats)
    }

    /// Remove every cache entry in `dir`; returns the number removed.
    pub fn clear(dir: &Path) -> std::io::Result<usize> {
        if !dir.exists() {
            return Ok(0);
        }
        let mut removed = 0;
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if is_entry_file(&path) {
                fs::remove_file(&path)?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}

fn is_entry_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
        && path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| !n.starts_with('.'))
}
