//! The eight geometric risk features of a reasoning point cloud and their
//! weighted aggregate `risk_topo`.
//!
//! Every feature grows with dispersion or disagreement between trajectories.
//! Before weighting, each feature is clamped to `[0, 1]` (consistency ranges
//! over `[0, 2]` and stability can exceed 1); the clamp is recorded per
//! feature so callers can tell when it binds. With non-negative weights that
//! sum to one the aggregate is therefore always in `[0, 1]`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{self, DistanceSummary, PointCloud, SquareMatrix};
use crate::special;
use crate::EPS_NUM;

pub const DBSCAN_EPS: f64 = 0.5;
pub const DBSCAN_MIN_SAMPLES: usize = 2;
/// Largest cluster count tried by the silhouette search.
pub const MAX_SILHOUETTE_CLUSTERS: usize = 5;
pub const KMEANS_MAX_ITER: usize = 300;
/// Seeded k-means restarts per cluster count; the lowest-inertia run wins.
pub const KMEANS_RESTARTS: u64 = 10;

pub const FEATURE_NAMES: [&str; 8] = [
    "spread",
    "consistency",
    "complexity",
    "stability",
    "coherence",
    "diversity",
    "outlier",
    "cluster_quality",
];

/// Weights of the aggregate, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureWeights([f64; 8]);

impl FeatureWeights {
    pub const DEFAULT: [f64; 8] = [0.20, 0.25, 0.10, 0.20, 0.10, 0.05, 0.05, 0.05];

    pub fn new(weights: [f64; 8]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights("weights must sum to 1"));
        }
        Ok(Self(weights))
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }
}

impl Default for FeatureWeights {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

/// Raw (unclamped) feature values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TopoFeatures {
    pub spread: f64,
    pub consistency: f64,
    pub complexity: f64,
    pub stability: f64,
    pub coherence: f64,
    pub diversity: f64,
    pub outlier: f64,
    pub cluster_quality: f64,
}

impl TopoFeatures {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.spread,
            self.consistency,
            self.complexity,
            self.stability,
            self.coherence,
            self.diversity,
            self.outlier,
            self.cluster_quality,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TopoProfile {
    pub features: TopoFeatures,
    /// Features after clamping to `[0, 1]`.
    pub clamped: [f64; 8],
    /// `true` where clamping changed the value.
    pub clamped_flags: [bool; 8],
    pub risk_topo: f64,
}

pub fn reasoning_spread(summary: &DistanceSummary) -> f64 {
    summary.std
}

/// One minus the mean off-diagonal cosine similarity.
pub fn consistency_score(cosines: &SquareMatrix) -> f64 {
    let k = cosines.size();
    let mut total = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            total += cosines.get(i, j);
        }
    }
    1.0 - 2.0 * total / (k * (k - 1)) as f64
}

/// Coefficient of variation of the pairwise distances.
pub fn complexity_entropy(summary: &DistanceSummary) -> f64 {
    if summary.mean < EPS_NUM {
        0.0
    } else {
        summary.std / summary.mean
    }
}

/// `n_noise / k + 1 / (n_clusters + 1)` under DBSCAN(ε = 0.5, min_samples = 2).
pub fn stability_score(cloud: &PointCloud) -> f64 {
    let a = geometry::dbscan(cloud, DBSCAN_EPS, DBSCAN_MIN_SAMPLES)
        .expect("constant DBSCAN parameters are valid");
    a.n_noise as f64 / cloud.len() as f64 + 1.0 / (a.n_clusters as f64 + 1.0)
}

/// Coefficient of variation of the centroid radii.
pub fn coherence_score(summary: &DistanceSummary) -> f64 {
    let m = special::mean(&summary.radii);
    if m < EPS_NUM {
        0.0
    } else {
        special::population_std(&summary.radii) / m
    }
}

pub fn diversity_penalty(summary: &DistanceSummary) -> f64 {
    (0.5 * (summary.mean - 1.0)).max(0.0)
}

/// Fraction of radii above the upper Tukey fence `Q3 + 1.5·IQR`.
pub fn outlier_risk(summary: &DistanceSummary) -> f64 {
    let mut sorted = summary.radii.clone();
    sorted.sort_by(f64::total_cmp);
    let q1 = special::quantile_sorted(&sorted, 0.25);
    let q3 = special::quantile_sorted(&sorted, 0.75);
    let fence = q3 + 1.5 * (q3 - q1);
    let above = summary.radii.iter().filter(|&&r| r > fence).count();
    above as f64 / summary.radii.len() as f64
}

/// Minimum-inertia clustering for a given cluster count: exact for clouds of
/// up to [`geometry::EXACT_KMEANS_MAX_POINTS`] points, otherwise the lowest
/// inertia over seeded Lloyd restarts.
pub fn best_kmeans(cloud: &PointCloud, n_clusters: usize, seed: u64) -> Result<geometry::KMeansFit> {
    if cloud.len() <= geometry::EXACT_KMEANS_MAX_POINTS {
        return geometry::exact_kmeans(cloud, n_clusters);
    }
    let mut best: Option<geometry::KMeansFit> = None;
    for restart in 0..KMEANS_RESTARTS {
        let fit = geometry::kmeans(cloud, n_clusters, seed.wrapping_add(restart), KMEANS_MAX_ITER)?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// `1 − max silhouette` over k-means clusterings with 2..=min(k, 5) clusters.
/// A collapsed cloud scores 0.
pub fn cluster_quality(cloud: &PointCloud, summary: &DistanceSummary, seed: u64) -> f64 {
    if summary.radii.iter().all(|&r| r < EPS_NUM) {
        return 0.0;
    }
    let upper = cloud.len().min(MAX_SILHOUETTE_CLUSTERS);
    let mut best: Option<f64> = None;
    for n_c in 2..=upper {
        let Ok(fit) = best_kmeans(cloud, n_c, seed) else {
            continue;
        };
        if let Ok(s) = geometry::silhouette(cloud, &fit.assignment) {
            best = Some(best.map_or(s, |b: f64| b.max(s)));
        }
    }
    best.map_or(0.0, |s| 1.0 - s)
}

/// Computes all eight features and the clamped weighted aggregate.
pub fn topo_profile(cloud: &PointCloud, weights: &FeatureWeights, seed: u64) -> Result<TopoProfile> {
    let summary = geometry::distance_summary(cloud);
    let cosines = geometry::cosine_matrix(cloud)?;
    let features = TopoFeatures {
        spread: reasoning_spread(&summary),
        consistency: consistency_score(&cosines),
        complexity: complexity_entropy(&summary),
        stability: stability_score(cloud),
        coherence: coherence_score(&summary),
        diversity: diversity_penalty(&summary),
        outlier: outlier_risk(&summary),
        cluster_quality: cluster_quality(cloud, &summary, seed),
    };
    Ok(aggregate(features, weights))
}

/// Clamps each feature to `[0, 1]` and forms the weighted sum.
pub fn aggregate(features: TopoFeatures, weights: &FeatureWeights) -> TopoProfile {
    let raw = features.to_array();
    let mut clamped = [0.0; 8];
    let mut clamped_flags = [false; 8];
    for i in 0..8 {
        clamped[i] = raw[i].clamp(0.0, 1.0);
        clamped_flags[i] = clamped[i] != raw[i];
    }
    let risk: f64 = clamped.iter().zip(weights.as_array()).map(|(f, w)| f * w).sum();
    TopoProfile {
        features,
        clamped,
        clamped_flags,
        risk_topo: risk.clamp(0.0, 1.0),
    }
}

/// Feature names whose clamp bound.
pub fn clamped_feature_names(profile: &TopoProfile) -> Vec<&'static str> {
    FEATURE_NAMES
        .iter()
        .zip(profile.clamped_flags)
        .filter(|(_, f)| *f)
        .map(|(n, _)| *n)
        .collect()
}
