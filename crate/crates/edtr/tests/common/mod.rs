#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edtr::ingest::{dataset_to_jsonl, Dataset, ReasoningSample, TrajectoryRecord};
use edtr::synth::{synth_dataset, GeneratorSpec};

pub fn edtr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edtr"))
        .args(args)
        .env_remove("EDTR_EMBED_ENDPOINT")
        .output()
        .expect("spawn edtr")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit status")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn write_dataset(dir: &Path, name: &str, dataset: &Dataset) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, dataset_to_jsonl(dataset).unwrap()).unwrap();
    path
}

pub fn small_synth(n: usize, seed: u64) -> Dataset {
    let spec = GeneratorSpec { n_samples: n, dim: 8, ..GeneratorSpec::default() };
    synth_dataset(&spec, seed).unwrap()
}

pub fn sample(id: &str, gold: Option<&str>, answers: &[&str], embeddings: &[Vec<f64>]) -> ReasoningSample {
    let trajectories = answers
        .iter()
        .zip(embeddings)
        .enumerate()
        .map(|(i, (a, e))| TrajectoryRecord {
            text: format!("path {i} says {a}"),
            answer: a.to_string(),
            embedding: e.clone(),
            token_probs: Some(vec![0.9, 0.8, 0.95]),
            token_entropies: None,
        })
        .collect();
    ReasoningSample::new(id, "q", gold.map(String::from), trajectories)
}
