//! Shared helpers for integration tests: a local OpenAI-compatible
//! completions stub and small dataset fixtures.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

/// Deterministic stand-in for a language model served over HTTP. Text is
/// split into whitespace-led tokens; each token after the first gets a
/// logprob derived from its characters and from how often it already
/// appeared, so label scores depend on the prompt.
pub struct StubServer {
    pub url: String,
    requests: Arc<AtomicUsize>,
    fail_next: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let fail_next = Arc::new(AtomicUsize::new(0));
        let (r, f) = (requests.clone(), fail_next.clone());
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (r, f) = (r.clone(), f.clone());
                thread::spawn(move || serve(stream, &r, &f));
            }
        });
        Self {
            url,
            requests,
            fail_next,
        }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Answer the next `n` requests with HTTP 503.
    pub fn fail_next(&self, n: usize) {
        self.fail_next.store(n, Ordering::SeqCst);
    }
}

fn serve(stream: TcpStream, requests: &AtomicUsize, fail_next: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut content_length = 0;
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 {
                return;
            }
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0; content_length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        requests.fetch_add(1, Ordering::SeqCst);
        let failing = fail_next
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        let (status, payload) = if failing {
            ("503 Service Unavailable", r#"{"error":"busy"}"#.to_string())
        } else {
            match serde_json::from_slice::<Value>(&body) {
                Ok(req) if req["prompt"].is_string() && req["echo"] == json!(true) => (
                    "200 OK",
                    completion(req["prompt"].as_str().unwrap()).to_string(),
                ),
                _ => ("400 Bad Request", r#"{"error":"bad request"}"#.to_string()),
            }
        };
        let resp = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if out.write_all(resp.as_bytes()).is_err() {
            return;
        }
    }
}

fn tokenize(text: &str) -> Vec<(usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = i;
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        tokens.push((start, chars[start..i].iter().collect()));
    }
    tokens
}

fn completion(prompt: &str) -> Value {
    let tokens = tokenize(prompt);
    let mut seen: Vec<&str> = Vec::new();
    let mut logprobs = Vec::new();
    for (i, (_, tok)) in tokens.iter().enumerate() {
        let word = tok.trim();
        if i == 0 {
            logprobs.push(Value::Null);
        } else {
            let base = word.bytes().map(u64::from).sum::<u64>() % 97;
            let repeats = seen.iter().filter(|w| **w == word).count();
            logprobs.push(json!(-0.05 - base as f64 / 40.0 + 0.3 * repeats as f64));
        }
        seen.push(word);
    }
    json!({
        "id": "cmpl-stub",
        "object": "text_completion",
        "choices": [{
            "text": prompt,
            "index": 0,
            "finish_reason": "length",
            "logprobs": {
                "tokens": tokens.iter().map(|(_, t)| t).collect::<Vec<_>>(),
                "token_logprobs": logprobs,
                "text_offset": tokens.iter().map(|(o, _)| o).collect::<Vec<_>>(),
            }
        }]
    })
}

/// Write a labeled JSONL file from `(text, label)` pairs.
pub fn write_jsonl(path: &Path, rows: &[(String, &str)]) {
    let body: String = rows
        .iter()
        .map(|(t, l)| json!({"text": t, "label": l}).to_string() + "\n")
        .collect();
    std::fs::write(path, body).unwrap();
}

/// Path of a bundled dataset config.
pub fn bundled_config(id: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/configs")
        .join(format!("{id}.toml"))
}

/// Copy a bundled config into `dir` with generated evaluation and
/// exemplar files, so the dataset loads by id from `dir`.
pub fn materialize_bundled(dir: &Path, id: &str, n_eval: usize, n_train: usize) {
    std::fs::copy(bundled_config(id), dir.join(format!("{id}.toml"))).unwrap();
    let raw = std::fs::read_to_string(bundled_config(id)).unwrap();
    let cfg: toml::Value = toml::from_str(&raw).unwrap();
    let labels: Vec<String> = cfg["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let rows = |n: usize, tag: &str| -> Vec<(String, &str)> {
        (0..n)
            .map(|i| {
                let label = labels[i % labels.len()].as_str();
                (format!("{tag} text {i} about {label} things"), label)
            })
            .collect()
    };
    write_jsonl(&dir.join(format!("{id}.jsonl")), &rows(n_eval, "eval"));
    write_jsonl(
        &dir.join(format!("{id}.train.jsonl")),
        &rows(n_train, "train"),
    );
}
