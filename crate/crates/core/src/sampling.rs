//! Bags of words and random content-free text.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("word list is empty")]
    EmptyWordList,
    #[error(
        "invalid word list entry {0:?}: words must be lower-case, unique and contain no whitespace"
    )]
    InvalidWord(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// A pool of words to draw random text from.
pub trait WordSource {
    fn words(&self) -> &[String];
}

/// Every whitespace-separated token of a corpus, with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagOfWords {
    tokens: Vec<String>,
    source_id: String,
}

impl BagOfWords {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl WordSource for BagOfWords {
    fn words(&self) -> &[String] {
        &self.tokens
    }
}

pub fn build_bag<I, S>(texts: I, source_id: impl Into<String>) -> Result<BagOfWords, SamplingError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let tokens: Vec<String> = texts
        .into_iter()
        .flat_map(|t| {
            t.as_ref()
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect();
    if tokens.is_empty() {
        return Err(SamplingError::EmptyCorpus);
    }
    Ok(BagOfWords {
        tokens,
        source_id: source_id.into(),
    })
}

const BUNDLED_ENGLISH: &str = include_str!("../data/english_words.txt");

/// Distinct lower-case English words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    words: Vec<String>,
}

impl WordList {
    pub fn new<I, S>(words: I) -> Result<Self, SamplingError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(SamplingError::EmptyWordList);
        }
        let mut seen = HashSet::new();
        for w in &words {
            if w.is_empty()
                || w.chars().any(char::is_whitespace)
                || w.to_lowercase() != *w
                || !seen.insert(w.as_str())
            {
                return Err(SamplingError::InvalidWord(w.clone()));
            }
        }
        Ok(Self { words })
    }

    /// One word per line; blank lines are skipped.
    pub fn parse(raw: &str) -> Result<Self, SamplingError> {
        Self::new(raw.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn load(path: &Path) -> Result<Self, SamplingError> {
        let raw = std::fs::read_to_string(path).map_err(|source| SamplingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&raw)
    }

    /// The built-in list of common English words.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_ENGLISH).expect("bundled word list is valid")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl WordSource for WordList {
    fn words(&self) -> &[String] {
        &self.words
    }
}

/// Mean whitespace token count, rounded half up, at least 1.
pub fn avg_length<I, S>(texts: I) -> Result<usize, SamplingError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let (mut n, mut total) = (0usize, 0usize);
    for t in texts {
        n += 1;
        total += t.as_ref().split_whitespace().count();
    }
    if n == 0 {
        return Err(SamplingError::EmptyCorpus);
    }
    // floor(total/n + 1/2) in integers
    Ok(((2 * total + n) / (2 * n)).max(1))
}

/// `len` words drawn uniformly with replacement, joined by single spaces.
pub fn sample_random_text<S: WordSource + ?Sized, R: Rng + ?Sized>(
    source: &S,
    len: usize,
    rng: &mut R,
) -> String {
    let words = source.words();
    assert!(!words.is_empty(), "word source must not be empty");
    let mut out = String::new();
    for i in 0..len {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&words[rng.random_range(0..words.len())]);
    }
    out
}
