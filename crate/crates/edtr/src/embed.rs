//! Embedding sources.
//!
//! A source is named by a descriptor string: `http:<url>` posts
//! `{"texts": [...]}` and expects `{"vectors": [[...], ...]}` back;
//! `file:<path>` reads a JSON object mapping the SHA-256 hex digest of each
//! text to its vector, so caches stay valid however the texts are ordered.

use std::collections::HashMap;
use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const ENDPOINT_ENV: &str = "EDTR_EMBED_ENDPOINT";

pub trait EmbeddingSource {
    /// One vector per text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct HttpSource {
    pub url: String,
    /// Additional attempts after the first failure.
    pub retries: u32,
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl HttpSource {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), retries: 3, base_delay: Duration::from_millis(200), timeout: Duration::from_secs(30) }
    }

    fn attempt(&self, body: &str) -> std::result::Result<String, Attempt> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let response = agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body);
        match response {
            Ok(mut r) => r.body_mut().read_to_string().map_err(|e| Attempt::Transient(e.to_string())),
            Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                Err(Attempt::Fatal(format!("HTTP {code}")))
            }
            Err(e) => Err(Attempt::Transient(e.to_string())),
        }
    }
}

enum Attempt {
    Transient(String),
    Fatal(String),
}

#[derive(Deserialize)]
struct VectorsReply {
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSource for HttpSource {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let body = serde_json::json!({ "texts": texts }).to_string();
        let mut delay = self.base_delay;
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(text) => {
                    let reply: VectorsReply =
                        serde_json::from_str(&text).map_err(|e| Error::BadResponseShape(e.to_string()))?;
                    if reply.vectors.len() != texts.len() {
                        return Err(Error::BadResponseShape(format!(
                            "{} vectors for {} texts",
                            reply.vectors.len(),
                            texts.len()
                        )));
                    }
                    return Ok(reply.vectors);
                }
                Err(Attempt::Fatal(msg)) => return Err(Error::EndpointUnreachable(msg)),
                Err(Attempt::Transient(msg)) => last = msg,
            }
        }
        Err(Error::EndpointUnreachable(format!("{} after {} attempts: {last}", self.url, self.retries + 1)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct FileSource {
    pub vectors: HashMap<String, Vec<f64>>,
}

impl FileSource {
    pub fn open(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let vectors = serde_json::from_str(&text).map_err(|e| Error::BadResponseShape(e.to_string()))?;
        Ok(Self { vectors })
    }
}

impl EmbeddingSource for FileSource {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| {
                let h = content_hash(t);
                self.vectors.get(&h).cloned().ok_or(Error::MissingPrecomputedVector(h))
            })
            .collect()
    }
}

/// Parses an `http:<url>` or `file:<path>` descriptor.
pub fn from_descriptor(descriptor: &str) -> Result<Box<dyn EmbeddingSource>> {
    if let Some(path) = descriptor.strip_prefix("file:") {
        return Ok(Box::new(FileSource::open(Path::new(path))?));
    }
    if let Some(rest) = descriptor.strip_prefix("http:") {
        let url = if rest.starts_with("http://") || rest.starts_with("https://") {
            rest.to_string()
        } else {
            format!("http:{rest}")
        };
        return Ok(Box::new(HttpSource::new(url)));
    }
    Err(Error::Config(format!("embedding descriptor must start with http: or file:, got {descriptor:?}")))
}

pub fn fetch_embeddings(texts: &[String], descriptor: &str) -> Result<Vec<Vec<f64>>> {
    from_descriptor(descriptor)?.embed(texts)
}
