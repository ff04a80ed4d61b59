//! The JSON Lines dataset model.
//!
//! One line per query:
//!
//! ```json
//! {"query_id": "q1", "question": "...", "gold_answer": "42" | null,
//!  "trajectories": [{"text": "...", "answer": "42", "embedding": [0.1, ...],
//!                    "token_probs": [0.9, ...] | null, "token_entropies": [...] | null}]}
//! ```
//!
//! `split` (`"train"`, `"calib"` or `"test"`) and `modality` are optional.
//! `predicted_answer` and `correct` are derived on load and written on save
//! for convenience; incoming values for them are ignored.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingSource;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub text: String,
    pub answer: String,
    /// Empty when the vector is to be fetched from an embedding source.
    #[serde(default)]
    pub embedding: Vec<f64>,
    #[serde(default)]
    pub token_probs: Option<Vec<f64>>,
    #[serde(default)]
    pub token_entropies: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningSample {
    pub query_id: String,
    #[serde(default)]
    pub question: String,
    #[serde(default)]
    pub gold_answer: Option<String>,
    pub trajectories: Vec<TrajectoryRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<String>,
    /// Majority normalized answer; ties go to the earliest trajectory.
    #[serde(skip_deserializing)]
    pub predicted_answer: String,
    #[serde(skip_deserializing)]
    pub correct: Option<bool>,
}

impl ReasoningSample {
    pub fn new(query_id: impl Into<String>, question: impl Into<String>, gold_answer: Option<String>, trajectories: Vec<TrajectoryRecord>) -> Self {
        let mut s = Self {
            query_id: query_id.into(),
            question: question.into(),
            gold_answer,
            trajectories,
            split: None,
            modality: None,
            predicted_answer: String::new(),
            correct: None,
        };
        s.derive_labels();
        s
    }

    pub fn k(&self) -> usize {
        self.trajectories.len()
    }

    /// Recomputes `predicted_answer` and `correct` from the trajectories.
    pub fn derive_labels(&mut self) {
        let answers: Vec<String> = self.trajectories.iter().map(|t| normalize_answer(&t.answer)).collect();
        self.predicted_answer = majority_answer(&answers).unwrap_or_default();
        self.correct = self.gold_answer.as_ref().map(|g| normalize_answer(g) == self.predicted_answer);
    }

    /// Distinct normalized answers in order of first appearance.
    pub fn answer_classes(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for t in &self.trajectories {
            let a = normalize_answer(&t.answer);
            if !seen.contains(&a) {
                seen.push(a);
            }
        }
        seen
    }

    /// Share of trajectories whose answer equals the majority answer.
    pub fn agreement_fraction(&self) -> f64 {
        let agree = self
            .trajectories
            .iter()
            .filter(|t| normalize_answer(&t.answer) == self.predicted_answer)
            .count();
        agree as f64 / self.k().max(1) as f64
    }

    fn validate(&self, dim: usize) -> std::result::Result<(), String> {
        if self.trajectories.len() < 2 {
            return Err(format!("query {} has {} trajectories, need at least 2", self.query_id, self.trajectories.len()));
        }
        for (i, t) in self.trajectories.iter().enumerate() {
            if t.embedding.len() != dim {
                return Err(format!("trajectory {i}: embedding dimension mismatch: expected {dim}, got {}", t.embedding.len()));
            }
            if t.embedding.iter().any(|v| !v.is_finite()) {
                return Err(format!("trajectory {i}: non-finite embedding value"));
            }
            if let Some(p) = &t.token_probs {
                if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(format!("trajectory {i}: token probability outside [0, 1]"));
                }
            }
            if let Some(h) = &t.token_entropies {
                if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(format!("trajectory {i}: negative or non-finite token entropy"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<ReasoningSample>,
    pub embedding_dim: usize,
    pub modality_tag: String,
}

impl Dataset {
    pub fn is_labelled(&self) -> bool {
        self.samples.iter().any(|s| s.correct.is_some())
    }

    /// Trajectory count shared by all samples, if uniform.
    pub fn uniform_k(&self) -> Option<usize> {
        let k = self.samples.first()?.k();
        self.samples.iter().all(|s| s.k() == k).then_some(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dropped {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    /// Lines rejected in lenient mode.
    pub dropped: Vec<Dropped>,
}

impl LoadOutcome {
    pub fn dropped_count(&self) -> usize {
        self.dropped.len()
    }
}

pub fn load_dataset(path: &Path, strict: bool) -> Result<LoadOutcome> {
    load_dataset_with(path, strict, None)
}

/// Like [`load_dataset`], filling empty embeddings from `embedder`. Embedding
/// failures are always fatal; they are not per-sample data problems.
pub fn load_dataset_with(path: &Path, strict: bool, embedder: Option<&dyn EmbeddingSource>) -> Result<LoadOutcome> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples: Vec<ReasoningSample> = Vec::new();
    let mut dropped = Vec::new();
    let mut ids = HashSet::new();
    let mut dim: Option<usize> = None;

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut sample: ReasoningSample = match serde_json::from_str(&line) {
            Ok(s) => s,
            Err(e) => {
                if strict {
                    return Err(Error::MalformedLine { line: line_no, reason: e.to_string() });
                }
                dropped.push(Dropped { line: line_no, reason: e.to_string() });
                continue;
            }
        };
        if let Some(source) = embedder {
            fill_embeddings(&mut sample, source)?;
        }
        let expected = *dim.get_or_insert_with(|| sample.trajectories.first().map_or(0, |t| t.embedding.len()));
        let mut verdict = sample.validate(expected);
        if verdict.is_ok() && !ids.insert(sample.query_id.clone()) {
            verdict = Err(format!("duplicate query_id {}", sample.query_id));
        }
        if let Err(reason) = verdict {
            if strict {
                if let Some(got) = sample.trajectories.iter().map(|t| t.embedding.len()).find(|&l| l != expected) {
                    return Err(Error::DimensionMismatch { expected, got });
                }
                return Err(Error::MalformedLine { line: line_no, reason });
            }
            dropped.push(Dropped { line: line_no, reason });
            continue;
        }
        sample.derive_labels();
        samples.push(sample);
    }
    let embedding_dim = match dim {
        Some(d) if d > 0 && !samples.is_empty() => d,
        _ => return Err(Error::EmptyDataset),
    };
    let modality_tag = samples
        .iter()
        .find_map(|s| s.modality.clone())
        .unwrap_or_else(|| String::from("unspecified"));
    Ok(LoadOutcome { dataset: Dataset { samples, embedding_dim, modality_tag }, dropped })
}

fn fill_embeddings(sample: &mut ReasoningSample, source: &dyn EmbeddingSource) -> Result<()> {
    let missing: Vec<usize> = (0..sample.k()).filter(|&i| sample.trajectories[i].embedding.is_empty()).collect();
    if missing.is_empty() {
        return Ok(());
    }
    let texts: Vec<String> = missing.iter().map(|&i| sample.trajectories[i].text.clone()).collect();
    let vectors = source.embed(&texts)?;
    for (i, v) in missing.into_iter().zip(vectors) {
        sample.trajectories[i].embedding = v;
    }
    Ok(())
}

/// One compact JSON object per line, in sample order.
pub fn dataset_to_jsonl(dataset: &Dataset) -> Result<String> {
    let mut out = String::new();
    for s in &dataset.samples {
        out.push_str(&serde_json::to_string(s).map_err(|e| Error::json("serialising sample", e))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    crate::report::write_atomic(path, dataset_to_jsonl(dataset)?.as_bytes())
}

/// Lowercases and trims; numeric strings additionally lose thousands
/// separators and an all-zero fractional part ("1,000.0" → "1000").
pub fn normalize_answer(raw: &str) -> String {
    let s = raw.trim().to_lowercase();
    let plain: String = s.chars().filter(|&c| c != ',').collect();
    if !is_decimal(&plain) {
        return s;
    }
    match plain.split_once('.') {
        Some((int, frac)) if frac.chars().all(|c| c == '0') => int.to_string(),
        _ => plain,
    }
}

fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    !int.is_empty()
        && int.chars().all(|c| c.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_digit()))
}

/// Most frequent answer; ties resolve to the one seen first.
pub fn majority_answer(answers: &[String]) -> Option<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for a in answers {
        *counts.entry(a.as_str()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for a in answers {
        let c = counts[a.as_str()];
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((a, c));
        }
    }
    best.map(|(a, _)| a.to_string())
}
