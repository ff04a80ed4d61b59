//! TOML run configuration. Every key is optional and command-line flags win.
//!
//! ```toml
//! dataset = "data.jsonl"
//! seed = 7
//! split = "0.6:0.2:0.2"
//!
//! [topo.weights]
//! w1 = 0.20
//! w2 = 0.25
//! # ... through w8
//!
//! [train]
//! epochs = 50
//! ```

use std::path::{Path, PathBuf};

use edtr_core::fusion::CombinerSpec;
use edtr_core::head::TrainingSpec;
use edtr_core::metrics::CompositeFormula;
use edtr_core::FeatureWeights;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub w6: f64,
    pub w7: f64,
    pub w8: f64,
}

impl WeightsSection {
    pub fn to_weights(&self) -> Result<FeatureWeights> {
        FeatureWeights::new([self.w1, self.w2, self.w3, self.w4, self.w5, self.w6, self.w7, self.w8])
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoSection {
    pub weights: Option<WeightsSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    /// Dirichlet components emitted by a freshly initialised head.
    pub components: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinerSection {
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub l2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub bins: Option<usize>,
    /// Weights for accuracy, F1, 1 − ECE and 1 − Brier; equal when absent.
    pub composite_weights: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub head: Option<PathBuf>,
    pub fusion: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub split: Option<String>,
    pub strict: Option<bool>,
    pub diagnostics: Option<bool>,
    pub fusion_mode: Option<String>,
    pub raw_eq3: Option<bool>,
    pub embed_endpoint: Option<String>,
    #[serde(default)]
    pub topo: TopoSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub combiner: CombinerSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn training(&self, seed: u64) -> TrainingSpec {
        let d = TrainingSpec::default();
        TrainingSpec {
            epochs: self.train.epochs.unwrap_or(d.epochs),
            learning_rate: self.train.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.train.batch_size.unwrap_or(d.batch_size),
            seed,
        }
    }

    pub fn combiner(&self) -> CombinerSpec {
        let d = CombinerSpec::default();
        CombinerSpec {
            iterations: self.combiner.iterations.unwrap_or(d.iterations),
            learning_rate: self.combiner.learning_rate.unwrap_or(d.learning_rate),
            l2: self.combiner.l2.unwrap_or(d.l2),
        }
    }

    pub fn composite(&self) -> CompositeFormula {
        match self.metrics.composite_weights {
            Some(w) => CompositeFormula::Weighted(w),
            None => CompositeFormula::MeanOfFour,
        }
    }
}

/// Reads the `[topo.weights]` section of a TOML file.
pub fn load_weights(path: &Path) -> Result<FeatureWeights> {
    #[derive(Deserialize)]
    struct OnlyWeights {
        #[serde(default)]
        topo: TopoSection,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let parsed: OnlyWeights = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parsed
        .topo
        .weights
        .ok_or_else(|| Error::Config(format!("{}: no [topo.weights] section", path.display())))?
        .to_weights()
}
