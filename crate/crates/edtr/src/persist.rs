//! JSON documents for head and fusion parameters.

use std::path::Path;

use edtr_core::fusion::FUSED_FEATURE_NAMES;
use edtr_core::head::{Activation, DenseLayer};
use edtr_core::{FusionParameters, HeadParameters};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    /// `outputs × inputs`.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadDoc {
    pub version: u32,
    pub k: usize,
    pub n: usize,
    pub layers: Vec<LayerDoc>,
    pub activation: Activation,
}

impl HeadDoc {
    pub fn from_params(p: &HeadParameters) -> Self {
        let layers = p
            .layers
            .iter()
            .map(|l| LayerDoc {
                w: l.weights.chunks(l.inputs).map(|r| r.to_vec()).collect(),
                b: l.bias.clone(),
            })
            .collect();
        Self { version: FORMAT_VERSION, k: p.k, n: p.n, layers, activation: p.activation }
    }

    pub fn into_params(self) -> Result<HeadParameters> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported head format version {}", self.version)));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in self.layers {
            let outputs = l.w.len();
            let inputs = l.w.first().map_or(0, |r| r.len());
            if l.w.iter().any(|r| r.len() != inputs) || l.b.len() != outputs {
                return Err(Error::Config(String::from("head layer has ragged weights or mismatched bias")));
            }
            layers.push(DenseLayer { inputs, outputs, weights: l.w.concat(), bias: l.b });
        }
        let params = HeadParameters { k: self.k, n: self.n, activation: self.activation, layers };
        params.validate().map_err(|e| Error::Incompatible(format!("head parameters: {e}")))?;
        Ok(params)
    }
}

/// Where a trained combiner came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the calibration rows and labels the combiner saw.
    pub training_set_hash: String,
    pub seed: u64,
    pub n_samples: usize,
    pub single_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionDoc {
    pub version: u32,
    #[serde(flatten)]
    pub params: FusionParameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FusionDoc {
    pub fn new(params: FusionParameters, provenance: Option<Provenance>) -> Self {
        let feature_names = matches!(params, FusionParameters::Trained(_))
            .then(|| FUSED_FEATURE_NAMES.iter().map(|s| s.to_string()).collect());
        Self { version: FORMAT_VERSION, params, feature_names, provenance }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::json("serialising", e))?;
    s.push('\n');
    Ok(s)
}

pub fn load_head(path: &Path) -> Result<HeadParameters> {
    read_json::<HeadDoc>(path)?.into_params()
}

pub fn save_head(params: &HeadParameters, path: &Path) -> Result<()> {
    write_atomic(path, to_pretty_json(&HeadDoc::from_params(params))?.as_bytes())
}

pub fn load_fusion(path: &Path) -> Result<FusionDoc> {
    let doc: FusionDoc = read_json(path)?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::Config(format!("unsupported fusion format version {}", doc.version)));
    }
    doc.params.validate().map_err(|e| Error::Incompatible(format!("fusion parameters: {e}")))?;
    Ok(doc)
}

pub fn save_fusion(doc: &FusionDoc, path: &Path) -> Result<()> {
    write_atomic(path, to_pretty_json(doc)?.as_bytes())
}
