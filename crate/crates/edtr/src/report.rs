//! Evaluation reports, reliability CSV and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use edtr_core::metrics::{self, CalibrationReport, CompositeFormula, ReliabilityBin, ScoredPrediction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const RELIABILITY_HEADER: &str = "bin,lo,hi,count,mean_confidence,empirical_accuracy";

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub name: String,
    pub ece: f64,
    pub brier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub n_bins: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub ece: f64,
    pub brier: f64,
    pub composite: f64,
    pub composite_formula: String,
    pub composite_note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineMetrics>,
}

/// The composite is a plain function of its four inputs; this note is
/// written next to it so readers do not compare it against scores built
/// from a different formula.
pub const COMPOSITE_NOTE: &str = "computed from the four reported inputs with the named formula; \
    a published composite of 0.662 for inputs accuracy 0.550, F1 0.572, ECE 0.306, Brier 0.221 \
    is not reproducible with it (the mean of four gives 0.649)";

impl EvaluationReport {
    pub fn from_calibration(r: &CalibrationReport, n_bins: usize) -> Self {
        Self {
            n: r.n,
            n_bins,
            accuracy: r.accuracy,
            f1: r.f1,
            ece: r.ece,
            brier: r.brier,
            composite: r.composite,
            composite_formula: r.composite_formula.clone(),
            composite_note: COMPOSITE_NOTE.to_string(),
            fusion_mode: None,
            baseline: None,
        }
    }
}

/// Headline metrics plus reliability bins for one set of predictions.
pub fn evaluate<S: AsRef<str>>(
    preds: &[ScoredPrediction],
    answers: &[(S, S)],
    n_bins: usize,
    formula: &CompositeFormula,
) -> Result<(EvaluationReport, Vec<ReliabilityBin>)> {
    let r = metrics::calibration_report(preds, answers, n_bins, formula)?;
    Ok((EvaluationReport::from_calibration(&r, n_bins), r.bins))
}

pub fn reliability_csv(bins: &[ReliabilityBin]) -> String {
    let mut out = String::from(RELIABILITY_HEADER);
    out.push('\n');
    for (i, b) in bins.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{},{}", b.lo, b.hi, b.count, b.mean_confidence, b.empirical_accuracy);
    }
    out
}

pub fn parse_reliability_csv(text: &str) -> Result<Vec<ReliabilityBin>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == RELIABILITY_HEADER => {}
        _ => return Err(Error::MalformedLine { line: 1, reason: format!("expected header {RELIABILITY_HEADER:?}") }),
    }
    lines
        .map(|(i, l)| {
            let bad = |reason: String| Error::MalformedLine { line: i + 1, reason };
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            Ok(ReliabilityBin {
                lo: num(f[1])?,
                hi: num(f[2])?,
                count: f[3].parse().map_err(|e| bad(format!("{:?}: {e}", f[3])))?,
                mean_confidence: num(f[4])?,
                empirical_accuracy: num(f[5])?,
            })
        })
        .collect()
}

/// Plain-text reliability table.
pub fn render_bins(bins: &[ReliabilityBin]) -> String {
    let total: usize = bins.iter().map(|b| b.count).sum();
    let mut out = String::from("bin  range          count  conf    acc     gap\n");
    for (i, b) in bins.iter().enumerate() {
        let gap = if b.count == 0 { 0.0 } else { (b.mean_confidence - b.empirical_accuracy).abs() };
        let _ = writeln!(
            out,
            "{i:<4} [{:.2}, {:.2}]  {:>5}  {:.4}  {:.4}  {:.4}",
            b.lo, b.hi, b.count, b.mean_confidence, b.empirical_accuracy, gap
        );
    }
    let _ = writeln!(out, "n = {total}, ece = {:.4}", metrics::ece_from_bins(bins));
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        let canonical = serde_json::to_vec(config).map_err(|e| Error::json("run configuration", e))?;
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_hash: sha256_hex(&canonical),
            ..Self::default()
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    /// Writes an output file atomically and records its hash.
    pub fn output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&dir.join(name), bytes)?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("manifest.json"), crate::persist::to_pretty_json(self)?.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let preds: Vec<ScoredPrediction> = [(0.95, true), (0.9, false), (0.3, false), (0.35, true), (0.55, true)]
            .iter()
            .map(|&(confidence, correct)| ScoredPrediction { confidence, correct })
            .collect();
        let bins = metrics::reliability_bins(&preds, 10).unwrap();
        let back = parse_reliability_csv(&reliability_csv(&bins)).unwrap();
        assert_eq!(back, bins);
        assert!((metrics::ece_from_bins(&back) - metrics::ece(&preds, 10).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(parse_reliability_csv("a,b\n0,0,0.1,0,0,0\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
    }
}
