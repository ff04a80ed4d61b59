//! Dataset-level scoring, splitting and fitting.

use std::thread;

use edtr_core::dirichlet::trajectory_stats;
use edtr_core::fusion::{fit_combiner, CombinerSpec, ConfidenceScore, FUSED_DIM};
use edtr_core::head::{self, Target, TrainExample, TrainingSpec};
use edtr_core::homology::{Barcode, PersistenceStats, DEFAULT_H1_CAP};
use edtr_core::metrics::{self, ScoredPrediction};
use edtr_core::topo::{clamped_feature_names, TopoFeatures};
use edtr_core::{DirichletProfile, FusionParameters, HeadParameters, PointCloud, Scorer, TrajectoryStats};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, ReasoningSample};
use crate::persist::{FusionDoc, Provenance};

/// Dirichlet components of a freshly initialised head.
pub const DEFAULT_COMPONENTS: usize = 5;

/// Mean token statistics over every trajectory that has them; used to
/// impute trajectories without token data. Zero when nothing has stats.
pub fn stat_means(dataset: &Dataset) -> Result<TrajectoryStats> {
    let (mut v, mut h, mut n) = (0.0, 0.0, 0usize);
    for s in &dataset.samples {
        for t in &s.trajectories {
            if let Some(p) = t.token_probs.as_deref().filter(|p| !p.is_empty()) {
                let st = trajectory_stats(p, t.token_entropies.as_deref())
                    .map_err(|e| Error::Sample { query_id: s.query_id.clone(), source: e })?;
                v += st.variance;
                h += st.entropy;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Ok(TrajectoryStats { variance: 0.0, entropy: 0.0 });
    }
    Ok(TrajectoryStats { variance: v / n as f64, entropy: h / n as f64 })
}

/// Per-trajectory statistics plus the indices that were imputed.
pub fn sample_stats(sample: &ReasoningSample, fallback: &TrajectoryStats) -> Result<(Vec<TrajectoryStats>, Vec<usize>)> {
    let mut stats = Vec::with_capacity(sample.k());
    let mut imputed = Vec::new();
    for (i, t) in sample.trajectories.iter().enumerate() {
        match t.token_probs.as_deref().filter(|p| !p.is_empty()) {
            Some(p) => stats.push(
                trajectory_stats(p, t.token_entropies.as_deref())
                    .map_err(|e| Error::Sample { query_id: sample.query_id.clone(), source: e })?,
            ),
            None => {
                stats.push(*fallback);
                imputed.push(i);
            }
        }
    }
    Ok((stats, imputed))
}

/// Number of answer classes the head models for this sample: the distinct
/// answers, at least 2 and at most the head's width.
pub fn components(sample: &ReasoningSample, head_n: usize) -> usize {
    sample.answer_classes().len().clamp(2, head_n.max(2))
}

/// One-hot on the gold answer's class when some trajectory found it,
/// uniform otherwise. `None` for unlabelled samples.
pub fn target(sample: &ReasoningSample, components: usize) -> Option<Target> {
    let gold = crate::ingest::normalize_answer(sample.gold_answer.as_deref()?);
    match sample.answer_classes().iter().position(|a| *a == gold) {
        Some(i) if i < components => Some(Target::Class(i)),
        _ => Some(Target::Uniform),
    }
}

pub fn point_cloud(sample: &ReasoningSample) -> Result<PointCloud> {
    let rows: Vec<&[f64]> = sample.trajectories.iter().map(|t| t.embedding.as_slice()).collect();
    PointCloud::from_rows(&rows).map_err(|e| Error::Sample { query_id: sample.query_id.clone(), source: e })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarcodeDoc {
    pub dim: u8,
    /// `[birth, death]`, with `null` for an infinite death.
    pub bars: Vec<(f64, Option<f64>)>,
}

impl From<&Barcode> for BarcodeDoc {
    fn from(b: &Barcode) -> Self {
        Self {
            dim: b.dimension,
            bars: b.bars.iter().map(|bar| (bar.birth, bar.death.is_finite().then_some(bar.death))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomologyDoc {
    pub h0: BarcodeDoc,
    pub h1: BarcodeDoc,
    pub stats: PersistenceStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBreakdown {
    pub topo: TopoFeatures,
    pub topo_clamped: [f64; 8],
    pub dirichlet: DirichletProfile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    /// Features whose value was clamped into `[0, 1]`.
    pub clamped: Vec<String>,
    /// Trajectories whose token statistics were imputed.
    pub imputed_trajectories: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub query_id: String,
    pub confidence: f64,
    pub conf_topo: f64,
    pub risk_topo: f64,
    pub conf_dir: f64,
    pub fusion_mode: String,
    pub predicted_answer: String,
    pub components: usize,
    pub features: FeatureBreakdown,
    pub flags: Flags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homology: Option<HomologyDoc>,
}

impl ConfidenceReport {
    fn new(sample: &ReasoningSample, score: ConfidenceScore, components: usize, imputed: Vec<usize>, mode: &str) -> Self {
        let clamped = clamped_feature_names(&score.topo).into_iter().map(String::from).collect();
        Self {
            query_id: sample.query_id.clone(),
            confidence: score.confidence,
            conf_topo: score.conf_topo,
            risk_topo: score.risk_topo,
            conf_dir: score.conf_dir,
            fusion_mode: mode.to_string(),
            predicted_answer: sample.predicted_answer.clone(),
            components,
            homology: score.homology.as_ref().map(|h| HomologyDoc {
                h0: (&h.h0).into(),
                h1: (&h.h1).into(),
                stats: h.stats,
            }),
            features: FeatureBreakdown { topo: score.topo.features, topo_clamped: score.topo.clamped, dirichlet: score.dirichlet },
            flags: Flags { clamped, imputed_trajectories: imputed },
        }
    }
}

/// Scores one sample end to end.
pub fn score_sample(sample: &ReasoningSample, scorer: &Scorer, fallback: &TrajectoryStats) -> Result<(ConfidenceReport, [f64; FUSED_DIM])> {
    let cloud = point_cloud(sample)?;
    let (stats, imputed) = sample_stats(sample, fallback)?;
    let n = components(sample, scorer.head.n);
    let score = scorer
        .score(&cloud, &stats, n)
        .map_err(|e| Error::Sample { query_id: sample.query_id.clone(), source: e })?;
    let fused = score.fused;
    Ok((ConfidenceReport::new(sample, score, n, imputed, scorer.fusion.mode_name()), fused))
}

/// Order-preserving map over scoped worker threads.
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers.max(1)).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<U>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("scoring worker panicked")).collect()
    })
}

/// Checks that the head and fusion parameters fit every sample.
pub fn check_compatible(dataset: &Dataset, scorer: &Scorer) -> Result<()> {
    if scorer.head.n < 2 {
        return Err(Error::Incompatible(format!("head emits n = {} components, need at least 2", scorer.head.n)));
    }
    if let Some(s) = dataset.samples.iter().find(|s| s.k() != scorer.head.k) {
        return Err(Error::Incompatible(format!(
            "head expects k = {} trajectories but query {} has {}",
            scorer.head.k,
            s.query_id,
            s.k()
        )));
    }
    scorer.fusion.validate().map_err(|e| Error::Incompatible(format!("fusion parameters: {e}")))
}

/// Scores the samples at `indices`, in that order, across worker threads.
pub fn score_indices(dataset: &Dataset, indices: &[usize], scorer: &Scorer) -> Result<Vec<(ConfidenceReport, [f64; FUSED_DIM])>> {
    check_compatible(dataset, scorer)?;
    let fallback = stat_means(dataset)?;
    par_map(indices, |&i| score_sample(&dataset.samples[i], scorer, &fallback)).into_iter().collect()
}

fn score_serial(dataset: &Dataset, indices: &[usize], scorer: &Scorer, fallback: &TrajectoryStats) -> Result<Vec<(ConfidenceReport, [f64; FUSED_DIM])>> {
    indices.iter().map(|&i| score_sample(&dataset.samples[i], scorer, fallback)).collect()
}

pub fn score_dataset(dataset: &Dataset, scorer: &Scorer) -> Result<Vec<ConfidenceReport>> {
    let all: Vec<usize> = (0..dataset.samples.len()).collect();
    Ok(score_indices(dataset, &all, scorer)?.into_iter().map(|(r, _)| r).collect())
}

/// A scorer with default weights and fusion and the homology cap applied
/// when diagnostics are on.
pub fn scorer_for(head: HeadParameters, diagnostics: bool) -> Scorer {
    let mut s = Scorer::new(head);
    if diagnostics {
        s.homology_cap = Some(DEFAULT_H1_CAP);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Calib,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Some(Split::Train),
            "calib" | "calibration" => Some(Split::Calib),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Calib => "calib",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub calib: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.6, calib: 0.2, test: 0.2 }
    }
}

impl SplitSpec {
    /// Accepts `train:calib:test=0.6:0.2:0.2` or just `0.6:0.2:0.2`.
    pub fn parse(s: &str) -> Result<Self> {
        let ratios = match s.split_once('=') {
            Some((names, ratios)) => {
                if names.trim() != "train:calib:test" {
                    return Err(Error::Config(format!("split names must be train:calib:test, got {names:?}")));
                }
                ratios
            }
            None => s,
        };
        let parts: Vec<f64> = ratios
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("split {s:?}: {e}")))?;
        let [train, calib, test] = parts[..] else {
            return Err(Error::Config(format!("split {s:?} needs three ratios")));
        };
        let spec = Self { train, calib, test };
        if [train, calib, test].iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (train + calib + test - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("split ratios must be non-negative and sum to 1, got {s:?}")));
        }
        Ok(spec)
    }
}

/// Split of each sample. An explicit `split` field on every sample wins;
/// otherwise a seeded shuffle is cut by the spec ratios.
pub fn assign_splits(dataset: &Dataset, spec: &SplitSpec, seed: u64) -> Result<Vec<Split>> {
    let n = dataset.samples.len();
    if dataset.samples.iter().all(|s| s.split.is_some()) {
        return dataset
            .samples
            .iter()
            .map(|s| {
                let name = s.split.as_deref().unwrap_or_default();
                Split::parse(name)
                    .ok_or_else(|| Error::MalformedLine { line: 0, reason: format!("query {}: unknown split {name:?}", s.query_id) })
            })
            .collect();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (spec.train * n as f64).round() as usize;
    let n_calib = ((spec.calib * n as f64).round() as usize).min(n - n_train.min(n));
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_calib {
            Split::Calib
        } else {
            Split::Test
        };
    }
    Ok(out)
}

pub fn indices_of(splits: &[Split], which: Split) -> Vec<usize> {
    (0..splits.len()).filter(|&i| splits[i] == which).collect()
}

/// Labelled predictions for the given samples.
pub fn predictions(dataset: &Dataset, reports: &[ConfidenceReport], indices: &[usize]) -> Vec<ScoredPrediction> {
    indices
        .iter()
        .zip(reports)
        .filter_map(|(&i, r)| dataset.samples[i].correct.map(|c| ScoredPrediction { confidence: r.confidence, correct: c }))
        .collect()
}

/// Agreement-fraction baseline: the share of trajectories that agree with
/// the majority answer, used directly as the confidence.
pub fn agreement_predictions(dataset: &Dataset, indices: &[usize]) -> Vec<ScoredPrediction> {
    indices
        .iter()
        .filter_map(|&i| {
            let s = &dataset.samples[i];
            s.correct.map(|c| ScoredPrediction { confidence: s.agreement_fraction(), correct: c })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub training: TrainingSpec,
    pub combiner: CombinerSpec,
    pub seed: u64,
    /// Components of a freshly initialised head.
    pub head_components: usize,
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub n: usize,
    /// Fixed-weight fusion with the starting head.
    pub ece_before: f64,
    pub brier_before: f64,
    /// Trained head and trained combiner.
    pub ece_after: f64,
    pub brier_after: f64,
    pub ece_agreement_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub seed: u64,
    pub n_train: usize,
    pub n_calib: usize,
    pub n_test: usize,
    pub head_loss_before: f64,
    pub head_loss_after: f64,
    pub single_class: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub held_out: HeldOut,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub head: HeadParameters,
    pub fusion: FusionDoc,
    pub summary: FitSummary,
}

fn labelled(dataset: &Dataset, indices: &[usize]) -> Vec<usize> {
    indices.iter().copied().filter(|&i| dataset.samples[i].correct.is_some()).collect()
}

/// Trains the head on the train split, then the combiner on the
/// calibration split, and compares both fusions on the test split.
/// `base` carries the weights, entropy form and starting head.
pub fn fit(dataset: &Dataset, splits: &[Split], base: &Scorer, opts: &FitOptions) -> Result<FitOutcome> {
    if !dataset.is_labelled() {
        return Err(Error::FitPrecondition(String::from("dataset has no gold answers")));
    }
    let train = labelled(dataset, &indices_of(splits, Split::Train));
    let calib = labelled(dataset, &indices_of(splits, Split::Calib));
    let test = labelled(dataset, &indices_of(splits, Split::Test));
    for (name, part) in [("train", &train), ("calib", &calib), ("test", &test)] {
        if part.is_empty() {
            return Err(Error::FitPrecondition(format!("{name} split has no labelled samples")));
        }
    }
    check_compatible(dataset, base)?;
    let fallback = stat_means(dataset)?;

    let mut examples = Vec::with_capacity(train.len());
    for &i in &train {
        let s = &dataset.samples[i];
        let (stats, _) = sample_stats(s, &fallback)?;
        let n = components(s, base.head.n);
        let target = target(s, n).expect("labelled sample");
        examples.push(TrainExample { stats, components: n, target });
    }
    let trained = head::train_head(base.head.clone(), &examples, &opts.training)?;
    let head_loss_before = trained.loss_history[0];
    let head_loss_after = *trained.loss_history.last().expect("initial loss recorded");

    let mut fixed = base.clone();
    fixed.head = trained.params.clone();
    fixed.fusion = FusionParameters::default();
    fixed.homology_cap = None;
    let calib_scored = score_serial(dataset, &calib, &fixed, &fallback)?;
    let rows: Vec<[f64; FUSED_DIM]> = calib_scored.iter().map(|(_, f)| *f).collect();
    let labels: Vec<bool> = calib.iter().map(|&i| dataset.samples[i].correct.expect("labelled")).collect();
    let fit = fit_combiner(&rows, &labels, &opts.combiner)?;
    let provenance = Provenance {
        training_set_hash: rows_hash(&rows, &labels),
        seed: opts.seed,
        n_samples: rows.len(),
        single_class: fit.single_class,
    };
    let warning = fit
        .single_class
        .then(|| String::from("calibration split holds a single class; combiner is intercept-only at the base rate"));
    let fusion = FusionParameters::Trained(fit.combiner);

    let mut before = base.clone();
    before.fusion = FusionParameters::default();
    before.homology_cap = None;
    let mut after = fixed.clone();
    after.fusion = fusion.clone();
    let test_before: Vec<ConfidenceReport> = score_serial(dataset, &test, &before, &fallback)?.into_iter().map(|(r, _)| r).collect();
    let test_after: Vec<ConfidenceReport> = score_serial(dataset, &test, &after, &fallback)?.into_iter().map(|(r, _)| r).collect();
    let pb = predictions(dataset, &test_before, &test);
    let pa = predictions(dataset, &test_after, &test);
    let pg = agreement_predictions(dataset, &test);
    let held_out = HeldOut {
        n: test.len(),
        ece_before: metrics::ece(&pb, opts.n_bins)?,
        brier_before: metrics::brier(&pb)?,
        ece_after: metrics::ece(&pa, opts.n_bins)?,
        brier_after: metrics::brier(&pa)?,
        ece_agreement_baseline: metrics::ece(&pg, opts.n_bins)?,
    };
    Ok(FitOutcome {
        head: trained.params,
        fusion: FusionDoc::new(fusion, Some(provenance)),
        summary: FitSummary {
            seed: opts.seed,
            n_train: train.len(),
            n_calib: calib.len(),
            n_test: test.len(),
            head_loss_before,
            head_loss_after,
            single_class: fit.single_class,
            warning,
            held_out,
        },
    })
}

fn rows_hash(rows: &[[f64; FUSED_DIM]], labels: &[bool]) -> String {
    let mut h = Sha256::new();
    for (r, &y) in rows.iter().zip(labels) {
        for v in r {
            h.update(v.to_le_bytes());
        }
        h.update([y as u8]);
    }
    hex::encode(h.finalize())
}
