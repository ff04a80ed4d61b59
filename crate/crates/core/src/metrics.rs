//! Calibration and task-quality metrics.
//!
//! ECE and the reliability diagram share one binning routine, so ECE
//! recomputed from emitted bins is bit-identical to the direct value.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

/// Confidences are clipped to this range before binning.
pub const ECE_CLIP: (f64, f64) = (0.01, 0.99);

/// Above this many distinct gold answers F1 reduces to exact-match accuracy.
pub const MACRO_F1_MAX_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredPrediction {
    pub confidence: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// 0 for an empty bin.
    pub mean_confidence: f64,
    /// 0 for an empty bin.
    pub empirical_accuracy: f64,
}

fn check(preds: &[ScoredPrediction]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    if let Some(row) = preds.iter().position(|p| !p.confidence.is_finite()) {
        return Err(Error::NonFiniteInput { row });
    }
    Ok(())
}

/// Bin index for `c` among `n_bins` equal-width bins: `[0, 1/n]` then
/// `(b/n, (b+1)/n]`.
fn bin_index(c: f64, n_bins: usize) -> usize {
    let mut b = 0;
    while b + 1 < n_bins && c > (b + 1) as f64 / n_bins as f64 {
        b += 1;
    }
    b
}

pub fn reliability_bins(preds: &[ScoredPrediction], n_bins: usize) -> Result<Vec<ReliabilityBin>> {
    check(preds)?;
    if n_bins == 0 {
        return Err(Error::InvalidParameter("n_bins must be at least 1"));
    }
    let mut conf_sum = alloc::vec![0.0; n_bins];
    let mut correct = alloc::vec![0usize; n_bins];
    let mut count = alloc::vec![0usize; n_bins];
    for p in preds {
        let c = p.confidence.clamp(ECE_CLIP.0, ECE_CLIP.1);
        let b = bin_index(c, n_bins);
        conf_sum[b] += c;
        count[b] += 1;
        if p.correct {
            correct[b] += 1;
        }
    }
    Ok((0..n_bins)
        .map(|b| {
            let n = count[b];
            let (mean_confidence, empirical_accuracy) = if n == 0 {
                (0.0, 0.0)
            } else {
                (conf_sum[b] / n as f64, correct[b] as f64 / n as f64)
            };
            ReliabilityBin {
                lo: b as f64 / n_bins as f64,
                hi: (b + 1) as f64 / n_bins as f64,
                count: n,
                mean_confidence,
                empirical_accuracy,
            }
        })
        .collect())
}

/// ECE from a bin list: `Σ_b (|B_b|/N)·|acc_b − conf_b|`.
pub fn ece_from_bins(bins: &[ReliabilityBin]) -> f64 {
    let total: usize = bins.iter().map(|b| b.count).sum();
    if total == 0 {
        return 0.0;
    }
    bins.iter()
        .filter(|b| b.count > 0)
        .map(|b| b.count as f64 / total as f64 * (b.empirical_accuracy - b.mean_confidence).abs())
        .sum()
}

pub fn ece(preds: &[ScoredPrediction], n_bins: usize) -> Result<f64> {
    Ok(ece_from_bins(&reliability_bins(preds, n_bins)?))
}

/// Mean squared gap between confidence and the 0/1 outcome.
pub fn brier(preds: &[ScoredPrediction]) -> Result<f64> {
    check(preds)?;
    let total: f64 = preds
        .iter()
        .map(|p| {
            let y = if p.correct { 1.0 } else { 0.0 };
            (p.confidence - y) * (p.confidence - y)
        })
        .sum();
    Ok(total / preds.len() as f64)
}

/// Exact-match accuracy and F1 over `(predicted, gold)` answer pairs.
///
/// F1 is macro-averaged over the distinct gold classes when there are at
/// most [`MACRO_F1_MAX_CLASSES`] of them; for free-form answer spaces it
/// equals accuracy.
pub fn accuracy_f1<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let n = pairs.len() as f64;
    let hits = pairs.iter().filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    let accuracy = hits as f64 / n;

    let mut classes: Vec<&str> = pairs.iter().map(|(_, g)| g.as_ref()).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() > MACRO_F1_MAX_CLASSES {
        return Ok((accuracy, accuracy));
    }
    let mut f1_sum = 0.0;
    for class in &classes {
        let tp = pairs.iter().filter(|(p, g)| p.as_ref() == *class && g.as_ref() == *class).count();
        let predicted = pairs.iter().filter(|(p, _)| p.as_ref() == *class).count();
        let actual = pairs.iter().filter(|(_, g)| g.as_ref() == *class).count();
        if tp == 0 {
            continue;
        }
        let precision = tp as f64 / predicted as f64;
        let recall = tp as f64 / actual as f64;
        f1_sum += 2.0 * precision * recall / (precision + recall);
    }
    Ok((accuracy, f1_sum / classes.len() as f64))
}

/// How accuracy, F1, ECE and Brier are folded into one score.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CompositeFormula {
    /// `mean(accuracy, f1, 1 − ece, 1 − brier)`.
    #[default]
    MeanOfFour,
    /// Weighted mean of the same four terms; weights are normalised.
    Weighted([f64; 4]),
}

impl CompositeFormula {
    pub fn name(&self) -> String {
        match self {
            CompositeFormula::MeanOfFour => String::from("mean(accuracy, f1, 1 - ece, 1 - brier)"),
            CompositeFormula::Weighted(w) => alloc::format!(
                "weighted_mean(accuracy*{}, f1*{}, (1 - ece)*{}, (1 - brier)*{})",
                w[0], w[1], w[2], w[3]
            ),
        }
    }
}

pub fn composite(accuracy: f64, f1: f64, ece: f64, brier: f64, formula: &CompositeFormula) -> f64 {
    let terms = [accuracy, f1, 1.0 - ece, 1.0 - brier];
    let value = match formula {
        CompositeFormula::MeanOfFour => terms.iter().sum::<f64>() / 4.0,
        CompositeFormula::Weighted(w) => {
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            terms.iter().zip(w).map(|(t, w)| t * w).sum::<f64>() / total
        }
    };
    value.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationReport {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub ece: f64,
    pub brier: f64,
    pub composite: f64,
    pub composite_formula: String,
    pub bins: Vec<ReliabilityBin>,
}

/// All headline metrics at once. `answers` holds `(predicted, gold)` pairs
/// for the same samples as `preds`.
pub fn calibration_report<S: AsRef<str>>(
    preds: &[ScoredPrediction],
    answers: &[(S, S)],
    n_bins: usize,
    formula: &CompositeFormula,
) -> Result<CalibrationReport> {
    let bins = reliability_bins(preds, n_bins)?;
    let ece = ece_from_bins(&bins);
    let brier = brier(preds)?;
    let (accuracy, f1) = accuracy_f1(answers)?;
    Ok(CalibrationReport {
        n: preds.len(),
        accuracy,
        f1,
        ece,
        brier,
        composite: composite(accuracy, f1, ece, brier, formula),
        composite_formula: formula.name(),
        bins,
    })
}
