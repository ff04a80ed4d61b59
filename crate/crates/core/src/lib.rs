//! Confidence estimation for multi-path chain-of-thought reasoning.
//!
//! Each query is answered by `k` sampled reasoning trajectories. Their sentence
//! embeddings form a small point cloud whose geometry (spread, angular
//! agreement, density clusters, silhouette quality, ...) is summarised as a
//! topological risk score. In parallel, per-trajectory token statistics drive a
//! small network that emits Dirichlet concentration parameters, from which a
//! second-order confidence is derived. The two are fused into a single
//! confidence and evaluated with standard calibration metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the embedding
//! client and the command-line tool live in the `edtr` companion crate.
//!
//! Module map:
//!
//! - [`geometry`]: point clouds, distance summaries, DBSCAN, k-means, silhouette
//! - [`topo`]: the eight geometric risk features and their weighted aggregate
//! - [`homology`]: Vietoris-Rips H0/H1 barcodes (diagnostics only)
//! - [`dirichlet`]: token statistics, Dirichlet feature vector and confidence
//! - [`head`]: the two-hidden-layer Dirichlet head, backprop and training
//! - [`fusion`]: fixed-weight fusion, the logistic combiner, end-to-end scoring
//! - [`metrics`]: ECE, Brier, accuracy/F1, composite, reliability bins
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dirichlet;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod head;
pub mod homology;
pub mod metrics;
pub mod special;
pub mod topo;

pub use error::{Error, Result};
pub use geometry::{ClusterAssignment, DistanceSummary, PointCloud};
pub use topo::{FeatureWeights, TopoProfile};
pub use dirichlet::{DirichletProfile, EntropyForm, TrajectoryStats};
pub use head::HeadParameters;
pub use fusion::{ConfidenceScore, FixedFusion, FusionParameters, LogisticCombiner, Scorer};
pub use metrics::{CalibrationReport, ReliabilityBin, ScoredPrediction};

/// Ratios whose denominator falls below this value are treated as degenerate
/// and evaluate to zero.
pub const EPS_NUM: f64 = 1e-12;
