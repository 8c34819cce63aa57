//! Client for OpenAI-compatible `/v1/completions` endpoints.
//!
//! Each label is scored with its own request whose prompt is
//! `prompt + " " + label`, echoed back with per-token logprobs. The label's
//! log-score is the sum of the logprobs of the tokens that start at or after
//! the end of `prompt`, which handles labels spanning several tokens.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{check_prompt, Backend, BackendError, ScoreResult};
use crate::dataset::LabelSet;

#[derive(Debug, Clone)]
pub struct RemoteOptions {
    /// Full completions URL, or a base URL that gets `/v1/completions` appended.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub parallelism: usize,
    pub retries: u32,
    pub backoff: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            timeout: Duration::from_secs(60),
            parallelism: 4,
            retries: 3,
            backoff: Duration::from_millis(250),
        }
    }
}

pub struct RemoteBackend {
    agent: ureq::Agent,
    url: String,
    opts: RemoteOptions,
    requests: AtomicUsize,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    logprobs: Option<Logprobs>,
}

#[derive(Deserialize)]
struct Logprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    text_offset: Option<Vec<usize>>,
}

fn completions_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.ends_with("/completions") {
        trimmed.to_string()
    } else if trimmed.ends_with("/v1") {
        format!("{trimmed}/completions")
    } else {
        format!("{trimmed}/v1/completions")
    }
}

/// Sum the logprobs of tokens in `[start, end)`, offsets in characters.
fn continuation_logprob(lp: &Logprobs, start: usize, end: usize) -> Result<f64, BackendError> {
    if lp.tokens.len() != lp.token_logprobs.len() {
        return Err(BackendError::Scoring(
            "tokens and logprobs differ in length".into(),
        ));
    }
    let offsets: Vec<usize> = match &lp.text_offset {
        Some(o) if o.len() == lp.tokens.len() => o.clone(),
        Some(_) => return Err(BackendError::Scoring("text_offset length mismatch".into())),
        None => lp
            .tokens
            .iter()
            .scan(0usize, |acc, t| {
                let here = *acc;
                *acc += t.chars().count();
                Some(here)
            })
            .collect(),
    };
    let mut total = 0.0;
    let mut n = 0;
    for (offset, logprob) in offsets.iter().zip(&lp.token_logprobs) {
        if *offset >= start && *offset < end {
            let lp = logprob
                .ok_or_else(|| BackendError::Scoring("missing logprob for label token".into()))?;
            total += lp;
            n += 1;
        }
    }
    if n == 0 {
        return Err(BackendError::Scoring(
            "no echoed tokens cover the label continuation".into(),
        ));
    }
    Ok(total)
}

enum Attempt {
    Retry(BackendError),
    Fatal(BackendError),
}

impl RemoteBackend {
    pub fn new(opts: RemoteOptions) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(opts.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: completions_url(&opts.endpoint),
            opts,
            requests: AtomicUsize::new(0),
        }
    }

    /// Number of HTTP requests issued so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn attempt(&self, text: &str) -> Result<Logprobs, Attempt> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let body = json!({
            "model": self.opts.model,
            "prompt": text,
            "max_tokens": 1,
            "temperature": 0,
            "echo": true,
            "logprobs": 1,
        });
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.opts.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| Attempt::Retry(BackendError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(BackendError::Transport(format!(
                "HTTP {status} from {}",
                self.url
            ))));
        }
        if status >= 400 {
            let msg = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(BackendError::Scoring(format!(
                "HTTP {status}: {msg}"
            ))));
        }
        let parsed: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(BackendError::Scoring(format!("bad response: {e}"))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .ok_or_else(|| Attempt::Fatal(BackendError::Scoring("response has no logprobs".into())))
    }

    fn score_one(&self, prompt: &str, label: &str) -> Result<f64, BackendError> {
        let text = format!("{prompt} {label}");
        let start = prompt.chars().count();
        let end = text.chars().count();
        let mut last = None;
        for attempt in 0..=self.opts.retries {
            if attempt > 0 {
                std::thread::sleep(self.opts.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&text) {
                Ok(lp) => return continuation_logprob(&lp, start, end),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(last.unwrap_or_else(|| BackendError::Transport("no attempts made".into())))
    }
}

impl Backend for RemoteBackend {
    fn kind(&self) -> &str {
        "remote"
    }

    fn model_id(&self) -> &str {
        &self.opts.model
    }

    fn log_scores(&self, prompt: &str, labels: &LabelSet) -> ScoreResult {
        check_prompt(prompt)?;
        labels
            .names()
            .iter()
            .map(|label| self.score_one(prompt, label))
            .collect()
    }

    fn log_scores_batch(&self, prompts: &[String], labels: &LabelSet) -> Vec<ScoreResult> {
        let n_labels = labels.len();
        let jobs = prompts.len() * n_labels;
        let results: Mutex<Vec<Option<Result<f64, BackendError>>>> = Mutex::new(vec![None; jobs]);
        let next = AtomicUsize::new(0);
        let workers = self.opts.parallelism.max(1).min(jobs.max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let job = next.fetch_add(1, Ordering::Relaxed);
                    if job >= jobs {
                        break;
                    }
                    let (p, l) = (job / n_labels, job % n_labels);
                    let out = check_prompt(&prompts[p])
                        .and_then(|_| self.score_one(&prompts[p], labels.name(l)));
                    results.lock().unwrap()[job] = Some(out);
                });
            }
        });
        let results = results.into_inner().unwrap();
        results
            .chunks(n_labels.max(1))
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|r| {
                        r.clone()
                            .unwrap_or_else(|| Err(BackendError::Scoring("job not run".into())))
                    })
                    .collect()
            })
            .collect()
    }
}
