//! Fusing topological risk with Dirichlet confidence.
//!
//! Two modes are supported. The fixed mode blends `1 − risk_topo` and
//! `conf_dir` with 60/40 weights and pushes the blend through a centred
//! sigmoid. The trained mode is an L2-regularised logistic regression over
//! the 13-dimensional fused feature vector (eight clamped risk features,
//! the four Dirichlet features and `conf_dir`), fit on a held-out
//! calibration split.

use alloc::vec;
use alloc::vec::Vec;

use crate::dirichlet::{self, DirichletProfile, EntropyForm, TrajectoryStats};
use crate::error::{Error, Result};
use crate::geometry::{self, PointCloud};
use crate::head::{self, HeadParameters};
use crate::homology::{self, Barcode, PersistenceStats};
use crate::special::{mean, population_std, sigmoid};
use crate::topo::{self, FeatureWeights, TopoProfile};
use crate::EPS_NUM;

pub const FUSED_DIM: usize = 13;

pub const FUSED_FEATURE_NAMES: [&str; FUSED_DIM] = [
    "spread",
    "consistency",
    "complexity",
    "stability",
    "coherence",
    "diversity",
    "outlier",
    "cluster_quality",
    "concentration",
    "diff_entropy",
    "expected_max",
    "top_class_variance",
    "conf_dir",
];

/// Reported confidences are kept strictly inside `(0, 1)`.
pub const CONFIDENCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedFusion {
    pub w_topo: f64,
    pub w_dir: f64,
    /// Slope applied to the blend before the sigmoid.
    pub scale: f64,
    pub bias: f64,
}

impl Default for FixedFusion {
    fn default() -> Self {
        Self { w_topo: 0.6, w_dir: 0.4, scale: 4.0, bias: -2.0 }
    }
}

impl FixedFusion {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.w_topo, self.w_dir, self.scale, self.bias];
        if vals.iter().any(|v| !v.is_finite()) || self.w_topo < 0.0 || self.w_dir < 0.0 {
            return Err(Error::InvalidWeights("fusion weights must be finite and non-negative"));
        }
        if (self.w_topo + self.w_dir - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights("w_topo + w_dir must equal 1"));
        }
        Ok(())
    }
}

/// `σ(a · (w_topo·(1 − risk_topo) + w_dir·conf_dir) + b)`.
pub fn fuse_fixed(risk_topo: f64, conf_dir: f64, params: &FixedFusion) -> f64 {
    let blend = params.w_topo * (1.0 - risk_topo) + params.w_dir * conf_dir;
    sigmoid(params.scale * blend + params.bias)
}

/// Logistic regression over standardised features.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogisticCombiner {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    /// Population standard deviations; constant features store 1.
    pub stds: Vec<f64>,
}

impl LogisticCombiner {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.weights.len();
        if self.means.len() != d || self.stds.len() != d {
            return Err(Error::InvalidParameter("combiner vectors differ in length"));
        }
        let all = self.weights.iter().chain(&self.means).chain(&self.stds).chain(core::iter::once(&self.intercept));
        if all.clone().any(|v| !v.is_finite()) || self.stds.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidParameter("combiner parameters must be finite with positive scales"));
        }
        Ok(())
    }

    pub fn logit(&self, features: &[f64]) -> f64 {
        let mut z = self.intercept;
        for i in 0..self.weights.len() {
            z += self.weights[i] * (features[i] - self.means[i]) / self.stds[i];
        }
        z
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: features.len() });
        }
        Ok(sigmoid(self.logit(features)))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CombinerSpec {
    pub iterations: usize,
    pub learning_rate: f64,
    /// L2 penalty on the weights (not the intercept).
    pub l2: f64,
}

impl Default for CombinerSpec {
    fn default() -> Self {
        Self { iterations: 3000, learning_rate: 0.1, l2: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinerFit {
    pub combiner: LogisticCombiner,
    /// All labels were identical; the model is intercept-only at the
    /// smoothed base-rate logit.
    pub single_class: bool,
}

/// Full-batch gradient descent on the regularised mean log-loss, starting
/// from zero.
pub fn fit_combiner<R: AsRef<[f64]>>(rows: &[R], labels: &[bool], spec: &CombinerSpec) -> Result<CombinerFit> {
    if !(spec.learning_rate > 0.0 && spec.learning_rate.is_finite()) {
        return Err(Error::InvalidHyper("learning rate must be positive"));
    }
    if !(spec.l2 >= 0.0 && spec.l2.is_finite()) {
        return Err(Error::InvalidHyper("l2 penalty must be non-negative"));
    }
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
    }
    let d = rows[0].as_ref().len();
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { row: i });
        }
    }

    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    let mut column = Vec::with_capacity(rows.len());
    for j in 0..d {
        column.clear();
        column.extend(rows.iter().map(|r| r.as_ref()[j]));
        means.push(mean(&column));
        let s = population_std(&column);
        stds.push(if s < EPS_NUM { 1.0 } else { s });
    }

    let n = rows.len() as f64;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        let rate = (positives as f64 + 0.5) / (n + 1.0);
        let combiner = LogisticCombiner {
            weights: vec![0.0; d],
            intercept: libm::log(rate / (1.0 - rate)),
            means,
            stds,
        };
        return Ok(CombinerFit { combiner, single_class: true });
    }

    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.as_ref().iter().enumerate().map(|(j, v)| (v - means[j]) / stds[j]).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad_w = vec![0.0; d];
    for _ in 0..spec.iterations {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (zi, yi) in z.iter().zip(&y) {
            let logit = b + zi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let err = sigmoid(logit) - yi;
            grad_b += err;
            for (g, x) in grad_w.iter_mut().zip(zi) {
                *g += err * x;
            }
        }
        b -= spec.learning_rate * grad_b / n;
        for (wj, gj) in w.iter_mut().zip(&grad_w) {
            *wj -= spec.learning_rate * (gj / n + spec.l2 * *wj);
        }
    }
    Ok(CombinerFit {
        combiner: LogisticCombiner { weights: w, intercept: b, means, stds },
        single_class: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "lowercase"))]
pub enum FusionParameters {
    Fixed(FixedFusion),
    Trained(LogisticCombiner),
}

impl Default for FusionParameters {
    fn default() -> Self {
        FusionParameters::Fixed(FixedFusion::default())
    }
}

impl FusionParameters {
    pub fn mode_name(&self) -> &'static str {
        match self {
            FusionParameters::Fixed(_) => "fixed",
            FusionParameters::Trained(_) => "trained",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FusionParameters::Fixed(f) => f.validate(),
            FusionParameters::Trained(c) => {
                c.validate()?;
                if c.dim() != FUSED_DIM {
                    return Err(Error::DimensionMismatch { expected: FUSED_DIM, got: c.dim() });
                }
                Ok(())
            }
        }
    }
}

pub fn fused_features(topo: &TopoProfile, dir: &DirichletProfile) -> [f64; FUSED_DIM] {
    let mut out = [0.0; FUSED_DIM];
    out[..8].copy_from_slice(&topo.clamped);
    out[8..12].copy_from_slice(&dir.features.to_array());
    out[12] = dir.conf_dir;
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HomologyDiagnostics {
    pub h0: Barcode,
    pub h1: Barcode,
    pub stats: PersistenceStats,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfidenceScore {
    pub confidence: f64,
    pub conf_topo: f64,
    pub risk_topo: f64,
    pub conf_dir: f64,
    pub topo: TopoProfile,
    pub dirichlet: DirichletProfile,
    pub fused: [f64; FUSED_DIM],
    pub homology: Option<HomologyDiagnostics>,
}

/// End-to-end scoring of one reasoning point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    pub weights: FeatureWeights,
    pub head: HeadParameters,
    pub fusion: FusionParameters,
    pub entropy_form: EntropyForm,
    pub seed: u64,
    /// Compute homology diagnostics for clouds up to this many points.
    pub homology_cap: Option<usize>,
}

impl Scorer {
    pub fn new(head: HeadParameters) -> Self {
        Self {
            weights: FeatureWeights::default(),
            head,
            fusion: FusionParameters::default(),
            entropy_form: EntropyForm::default(),
            seed: 0,
            homology_cap: None,
        }
    }

    /// Dirichlet profile over the first `components` head outputs.
    pub fn dirichlet(&self, stats: &[TrajectoryStats], components: usize) -> Result<DirichletProfile> {
        if components == 0 || components > self.head.n {
            return Err(Error::InconsistentN { expected: self.head.n, got: components });
        }
        let alpha = head::head_forward(&self.head, stats)?;
        dirichlet::dirichlet_profile(&alpha[..components], self.entropy_form)
    }

    pub fn score(&self, cloud: &PointCloud, stats: &[TrajectoryStats], components: usize) -> Result<ConfidenceScore> {
        if cloud.len() != self.head.k {
            return Err(Error::DimensionMismatch { expected: self.head.k, got: cloud.len() });
        }
        let topo = topo::topo_profile(cloud, &self.weights, self.seed)?;
        let dirichlet = self.dirichlet(stats, components)?;
        let fused = fused_features(&topo, &dirichlet);
        let raw = match &self.fusion {
            FusionParameters::Fixed(f) => fuse_fixed(topo.risk_topo, dirichlet.conf_dir, f),
            FusionParameters::Trained(c) => c.predict(&fused)?,
        };
        let homology = match self.homology_cap {
            Some(cap) => {
                let summary = geometry::distance_summary(cloud);
                let h0 = homology::h0_barcode(&summary);
                let h1 = homology::h1_barcode(&summary, cap)?;
                let stats = homology::persistence_stats(&h0, &h1);
                Some(HomologyDiagnostics { h0, h1, stats })
            }
            None => None,
        };
        Ok(ConfidenceScore {
            confidence: raw.clamp(CONFIDENCE_FLOOR, 1.0 - CONFIDENCE_FLOOR),
            conf_topo: 1.0 - topo.risk_topo,
            risk_topo: topo.risk_topo,
            conf_dir: dirichlet.conf_dir,
            topo,
            dirichlet,
            fused,
            homology,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_fusion_fixtures() {
        let f = FixedFusion::default();
        assert_eq!(fuse_fixed(0.5, 0.5, &f), 0.5);
        let hi = fuse_fixed(0.0, 0.99, &f);
        assert!((hi - sigmoid(4.0 * 0.996 - 2.0)).abs() < 1e-15);
        assert!((hi - 0.879).abs() < 1e-3);
        let lo = fuse_fixed(1.0, 0.01, &f);
        assert!((lo - 0.121).abs() < 1e-3);
        assert!((hi + lo - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_fusion_validation() {
        assert!(FixedFusion::default().validate().is_ok());
        let bad = FixedFusion { w_topo: 0.7, ..FixedFusion::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn combiner_separates_toy_set() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [(i % 2) as f64 + 0.01 * (i as f64 / 20.0)]).collect();
        let labels: Vec<bool> = (0..20).map(|i| i % 2 == 1).collect();
        let fit = fit_combiner(&rows, &labels, &CombinerSpec::default()).unwrap();
        assert!(!fit.single_class);
        for (r, &l) in rows.iter().zip(&labels) {
            let p = fit.combiner.predict(r).unwrap();
            assert_eq!(p > 0.5, l);
        }
    }

    #[test]
    fn combiner_zero_features_learn_base_rate() {
        let rows = vec![[0.0, 0.0]; 10];
        let labels: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let fit = fit_combiner(&rows, &labels, &CombinerSpec::default()).unwrap();
        let p = fit.combiner.predict(&[0.0, 0.0]).unwrap();
        assert!((p - 0.3).abs() < 1e-6, "{p}");
        assert!((fit.combiner.intercept - libm::log(0.3 / 0.7)).abs() < 1e-5);
        assert_eq!(fit.combiner.weights, vec![0.0, 0.0]);
    }

    #[test]
    fn combiner_zero_iterations_predicts_half() {
        let rows = vec![[1.0], [2.0], [3.0]];
        let labels = [true, false, true];
        let spec = CombinerSpec { iterations: 0, ..CombinerSpec::default() };
        let fit = fit_combiner(&rows, &labels, &spec).unwrap();
        assert_eq!(fit.combiner.weights, vec![0.0]);
        for r in &rows {
            assert_eq!(fit.combiner.predict(r).unwrap(), 0.5);
        }
    }

    #[test]
    fn combiner_single_class_falls_back() {
        let rows = vec![[0.3], [0.9], [0.1], [0.5]];
        let fit = fit_combiner(&rows, &[true; 4], &CombinerSpec::default()).unwrap();
        assert!(fit.single_class);
        let p = fit.combiner.predict(&[0.7]).unwrap();
        assert!((p - 4.5 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn combiner_errors() {
        let rows = vec![[0.3], [0.9]];
        let spec = CombinerSpec { learning_rate: -1.0, ..CombinerSpec::default() };
        assert!(matches!(fit_combiner(&rows, &[true, false], &spec), Err(Error::InvalidHyper(_))));
        let empty: Vec<[f64; 1]> = Vec::new();
        assert_eq!(fit_combiner(&empty, &[], &CombinerSpec::default()), Err(Error::EmptyTrainingSet));
        assert!(fit_combiner(&rows, &[true], &CombinerSpec::default()).is_err());
    }

    #[test]
    fn trained_parameters_need_thirteen_features() {
        let c = LogisticCombiner { weights: vec![0.0; 3], intercept: 0.0, means: vec![0.0; 3], stds: vec![1.0; 3] };
        assert!(FusionParameters::Trained(c).validate().is_err());
    }

    #[test]
    fn scorer_on_identical_trajectories() {
        let rows = vec![[0.6, 0.8, 0.0]; 5];
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let stats = vec![TrajectoryStats { variance: 0.0, entropy: 0.0 }; 5];
        let scorer = Scorer::new(HeadParameters::seeded(5, 5, 13));
        let s = scorer.score(&cloud, &stats, 2).unwrap();
        assert!((s.risk_topo - 0.10).abs() < 1e-12);
        assert!((s.conf_topo - 0.90).abs() < 1e-12);
        assert!(s.confidence > 0.0 && s.confidence < 1.0);
        assert!(s.dirichlet.alpha.iter().all(|&a| a > 1.0));
        assert_eq!(s.dirichlet.alpha.len(), 2);
        assert_eq!(s.fused[12], s.conf_dir);
        assert!(s.homology.is_none());
        assert_eq!(scorer.score(&cloud, &stats, 2).unwrap(), s);
    }

    #[test]
    fn scorer_checks_k_and_components() {
        let rows = vec![[1.0, 0.0]; 3];
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let stats = vec![TrajectoryStats::default(); 3];
        let scorer = Scorer::new(HeadParameters::zeros(4, 3));
        assert!(matches!(scorer.score(&cloud, &stats, 2), Err(Error::DimensionMismatch { .. })));
        let scorer = Scorer::new(HeadParameters::zeros(3, 3));
        assert!(matches!(scorer.score(&cloud, &stats, 4), Err(Error::InconsistentN { .. })));
    }

    #[test]
    fn scorer_attaches_homology_when_asked() {
        let rows = [[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]];
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let stats = vec![TrajectoryStats::default(); 4];
        let mut scorer = Scorer::new(HeadParameters::zeros(4, 4));
        scorer.homology_cap = Some(homology::DEFAULT_H1_CAP);
        let s = scorer.score(&cloud, &stats, 4).unwrap();
        let h = s.homology.unwrap();
        assert_eq!(h.h0.bars.len(), 4);
        assert_eq!(h.h1.bars.len(), 1);
    }
}
