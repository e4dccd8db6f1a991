//! Client layer for the text-generation service.
//!
//! The pipeline talks to a local generation endpoint (an `ollama`-style
//! `POST {base}/api/generate` returning `{"response": "..."}`). Every call
//! site goes through the [`TextGenerator`] trait, so tests and offline runs
//! can swap the HTTP transport for a [`CassetteGenerator`] that replays
//! recorded responses keyed by a request hash. A [`RecordingGenerator`]
//! wraps a live client and appends each (key, response) pair to a cassette
//! file, doubling as a persistent response cache.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("generation service transport failure ({context}): {message}")]
    Transport { context: String, message: String },
    #[error("generation service returned no usable text")]
    EmptyResponse,
    #[error("no recorded response for request key {key}")]
    MissingRecording { key: String },
    #[error("cassette file error at {path}: {message}")]
    Cassette { path: PathBuf, message: String },
}

/// One fully specified generation call. Identical requests must produce
/// identical cassette keys, so all generation parameters live here.
#[derive(Debug, Clone, Serialize)]
pub struct GenerationRequest {
    pub model: String,
    pub system: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Content hash identifying a request: SHA-256 over the canonical JSON
/// serialization (fixed field order).
pub fn request_key(req: &GenerationRequest) -> String {
    let canonical = serde_json::to_string(req).expect("request serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<String, LlmError>;
}

/// HTTP transport against an `/api/generate` endpoint, with idempotent
/// retries on transport failures.
pub struct HttpGenerator {
    base_url: String,
    agent: ureq::Agent,
    retries: u32,
}

impl HttpGenerator {
    pub fn new(base_url: &str, timeout: Duration, retries: u32) -> HttpGenerator {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        HttpGenerator {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent: config.into(),
            retries,
        }
    }

    fn call_once(&self, req: &GenerationRequest) -> Result<String, LlmError> {
        let url = format!("{}/api/generate", self.base_url);
        let body = serde_json::json!({
            "model": req.model,
            "system": req.system,
            "prompt": req.prompt,
            "stream": false,
            "options": {
                "temperature": req.temperature,
                "num_predict": req.max_tokens,
            },
        });
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| LlmError::Transport {
                context: url.clone(),
                message: e.to_string(),
            })?;
        let value: serde_json::Value =
            resp.body_mut()
                .read_json()
                .map_err(|e| LlmError::Transport {
                    context: url.clone(),
                    message: format!("invalid response body: {e}"),
                })?;
        match value.get("response").and_then(|v| v.as_str()) {
            Some(text) => Ok(text.to_string()),
            None => Err(LlmError::EmptyResponse),
        }
    }
}

impl TextGenerator for HttpGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<String, LlmError> {
        let mut last = None;
        for attempt in 0..=self.retries {
            match self.call_once(req) {
                Ok(text) => return Ok(text),
                Err(e @ LlmError::EmptyResponse) => return Err(e),
                Err(e) => {
                    last = Some(e);
                    if attempt < self.retries {
                        std::thread::sleep(Duration::from_millis(100 << attempt.min(6)));
                    }
                }
            }
        }
        Err(last.unwrap_or(LlmError::EmptyResponse))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CassetteLine {
    key: String,
    response: String,
}

/// Replays recorded responses; errors on requests that were never recorded.
#[derive(Debug, Default)]
pub struct CassetteGenerator {
    responses: BTreeMap<String, String>,
}

impl CassetteGenerator {
    pub fn from_map(responses: BTreeMap<String, String>) -> CassetteGenerator {
        CassetteGenerator { responses }
    }

    /// Load a newline-delimited cassette of `{"key", "response"}` records.
    /// Later lines win, so appended re-recordings override older ones.
    pub fn load(path: &Path) -> Result<CassetteGenerator, LlmError> {
        let file = std::fs::File::open(path).map_err(|e| LlmError::Cassette {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut responses = BTreeMap::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|e| LlmError::Cassette {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CassetteLine =
                serde_json::from_str(&line).map_err(|e| LlmError::Cassette {
                    path: path.to_path_buf(),
                    message: format!("bad cassette line: {e}"),
                })?;
            responses.insert(rec.key, rec.response);
        }
        Ok(CassetteGenerator { responses })
    }

    pub fn insert(&mut self, key: String, response: String) {
        self.responses.insert(key, response);
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Write the cassette to disk (sorted by key; stable bytes).
    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let mut out = String::new();
        for (key, response) in &self.responses {
            let line = serde_json::to_string(&CassetteLine {
                key: key.clone(),
                response: response.clone(),
            })
            .expect("cassette line serializes");
            out.push_str(&line);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| LlmError::Cassette {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

impl TextGenerator for CassetteGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<String, LlmError> {
        let key = request_key(req);
        self.responses
            .get(&key)
            .cloned()
            .ok_or(LlmError::MissingRecording { key })
    }
}

/// Wraps a live client; every response is appended to a cassette file and
/// cached in memory, so repeated identical requests hit the service once.
pub struct RecordingGenerator<G> {
    inner: G,
    path: PathBuf,
    cache: Mutex<BTreeMap<String, String>>,
}

impl<G: TextGenerator> RecordingGenerator<G> {
    /// Open (or create) the cassette at `path`; existing recordings become
    /// the warm cache.
    pub fn new(inner: G, path: &Path) -> Result<RecordingGenerator<G>, LlmError> {
        let cache = if path.exists() {
            CassetteGenerator::load(path)?.responses
        } else {
            BTreeMap::new()
        };
        Ok(RecordingGenerator {
            inner,
            path: path.to_path_buf(),
            cache: Mutex::new(cache),
        })
    }
}

impl<G: TextGenerator> TextGenerator for RecordingGenerator<G> {
    fn generate(&self, req: &GenerationRequest) -> Result<String, LlmError> {
        let key = request_key(req);
        if let Some(hit) = self.cache.lock().unwrap().get(&key).cloned() {
            return Ok(hit);
        }
        let response = self.inner.generate(req)?;
        let mut cache = self.cache.lock().unwrap();
        cache.insert(key.clone(), response.clone());
        let line = serde_json::to_string(&CassetteLine {
            key,
            response: response.clone(),
        })
        .expect("cassette line serializes");
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| LlmError::Cassette {
                path: self.path.clone(),
                message: e.to_string(),
            })?;
        writeln!(file, "{line}").map_err(|e| LlmError::Cassette {
            path: self.path.clone(),
            message: e.to_string(),
        })?;
        Ok(response)
    }
}

/// Issue many requests through a bounded pool of worker threads, preserving
/// input order in the output.
pub fn generate_batch(
    client: &dyn TextGenerator,
    requests: &[GenerationRequest],
    concurrency: usize,
) -> Vec<Result<String, LlmError>> {
    let concurrency = concurrency.max(1).min(requests.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<String, LlmError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..concurrency {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= requests.len() {
                    break;
                }
                let out = client.generate(&requests[i]);
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> GenerationRequest {
        GenerationRequest {
            model: "test-model".into(),
            system: "sys".into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 10,
        }
    }

    #[test]
    fn request_key_is_stable_and_sensitive() {
        let a = request_key(&req("hello"));
        assert_eq!(a, request_key(&req("hello")));
        assert_ne!(a, request_key(&req("other")));
        let mut hot = req("hello");
        hot.temperature = 0.7;
        assert_ne!(a, request_key(&hot));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn cassette_roundtrip_and_missing_key() {
        let mut c = CassetteGenerator::default();
        c.insert(request_key(&req("a")), "alpha".into());
        assert_eq!(c.generate(&req("a")).unwrap(), "alpha");
        match c.generate(&req("b")) {
            Err(LlmError::MissingRecording { key }) => {
                assert_eq!(key, request_key(&req("b")));
            }
            other => panic!("expected MissingRecording, got {other:?}"),
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cassette.jsonl");
        c.save(&path).unwrap();
        let loaded = CassetteGenerator::load(&path).unwrap();
        assert_eq!(loaded.generate(&req("a")).unwrap(), "alpha");
        assert_eq!(loaded.len(), 1);
    }

    #[test]
    fn recording_generator_caches_and_persists() {
        struct Counting(AtomicUsize);
        impl TextGenerator for Counting {
            fn generate(&self, req: &GenerationRequest) -> Result<String, LlmError> {
                self.0.fetch_add(1, Ordering::Relaxed);
                Ok(format!("echo:{}", req.prompt))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let rec = RecordingGenerator::new(Counting(AtomicUsize::new(0)), &path).unwrap();
        assert_eq!(rec.generate(&req("x")).unwrap(), "echo:x");
        assert_eq!(rec.generate(&req("x")).unwrap(), "echo:x");
        assert_eq!(rec.inner.0.load(Ordering::Relaxed), 1, "second call cached");

        // A fresh replay client sees the recorded response.
        let replay = CassetteGenerator::load(&path).unwrap();
        assert_eq!(replay.generate(&req("x")).unwrap(), "echo:x");
    }

    #[test]
    fn batch_preserves_order() {
        struct Echo;
        impl TextGenerator for Echo {
            fn generate(&self, req: &GenerationRequest) -> Result<String, LlmError> {
                Ok(req.prompt.clone())
            }
        }
        let reqs: Vec<GenerationRequest> = (0..50).map(|i| req(&format!("p{i}"))).collect();
        let out = generate_batch(&Echo, &reqs, 8);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.as_ref().unwrap(), &format!("p{i}"));
        }
    }
}
