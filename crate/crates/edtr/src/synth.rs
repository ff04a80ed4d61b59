//! Labelled synthetic datasets with a known confident/uncertain split.
//!
//! A confident sample draws all `k` embeddings from one tight isotropic
//! Gaussian, every trajectory gives the gold answer, and token
//! probabilities are high with little spread. An uncertain sample spreads
//! its trajectories round-robin over at least two Gaussians whose centres
//! sit exactly `separation` apart, each component giving its own wrong
//! answer, with middling and widely varying token probabilities. `label_noise` flips the gold answer of that
//! share of samples so the correctness labels are not perfectly separable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, ReasoningSample, TrajectoryRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_samples: usize,
    pub k: usize,
    pub dim: usize,
    pub sigma_tight: f64,
    pub sigma_wide: f64,
    /// Distance between mixture components of an uncertain sample.
    pub separation: f64,
    /// Scale of the random per-sample offset of the whole cloud.
    pub center_scale: f64,
    pub confident_fraction: f64,
    /// Mixture components per uncertain sample (at least 2).
    pub components: usize,
    pub label_noise: f64,
    pub tokens: usize,
    pub modality: String,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_samples: 200,
            k: 5,
            dim: 32,
            sigma_tight: 0.05,
            sigma_wide: 0.3,
            separation: 5.0,
            center_scale: 1.0,
            confident_fraction: 0.5,
            components: 2,
            label_noise: 0.1,
            tokens: 24,
            modality: String::from("synthetic"),
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if self.n_samples == 0 || self.dim == 0 || self.tokens == 0 {
            return bad("n_samples, dim and tokens must be positive");
        }
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.components < 2 || self.components > self.k {
            return bad("components must lie in 2..=k");
        }
        for (name, v) in [
            ("sigma_tight", self.sigma_tight),
            ("sigma_wide", self.sigma_wide),
            ("separation", self.separation),
            ("center_scale", self.center_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.confident_fraction) || !(0.0..=1.0).contains(&self.label_noise) {
            return bad("confident_fraction and label_noise must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn n_confident(&self) -> usize {
        (self.n_samples as f64 * self.confident_fraction).round() as usize
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim, 1.0);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `count` random orthonormal directions (Gram-Schmidt); when `dim < count`
/// the surplus directions are merely random unit vectors.
fn orthonormal(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = unit(rng, dim);
        if basis.len() < dim {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= n);
        }
        basis.push(v);
    }
    basis
}

fn token_probs(rng: &mut ChaCha8Rng, n: usize, confident: bool) -> Vec<f64> {
    let dist = if confident { Beta::new(30.0, 1.5) } else { Beta::new(1.2, 1.2) }.expect("valid beta parameters");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Samples `0..n_confident` are confident, the rest uncertain. Output is a
/// pure function of `(spec, seed)`.
pub fn synth_dataset(spec: &GeneratorSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_confident = spec.n_confident();
    let mut samples = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let confident = i < n_confident;
        let offset = gaussian(&mut rng, spec.dim, spec.center_scale);
        let gold = format!("{}", 100 + i);
        let mut trajectories = Vec::with_capacity(spec.k);
        if confident {
            for j in 0..spec.k {
                trajectories.push(TrajectoryRecord {
                    text: format!("query {i} path {j}: the answer is {gold}"),
                    answer: gold.clone(),
                    embedding: add(&offset, &gaussian(&mut rng, spec.dim, spec.sigma_tight)),
                    token_probs: Some(token_probs(&mut rng, spec.tokens, true)),
                    token_entropies: None,
                });
            }
        } else {
            let radius = spec.separation / std::f64::consts::SQRT_2;
            let centers: Vec<Vec<f64>> = orthonormal(&mut rng, spec.dim, spec.components)
                .iter()
                .map(|dir| add(&offset, &dir.iter().map(|d| d * radius).collect::<Vec<_>>()))
                .collect();
            for j in 0..spec.k {
                let c = j % spec.components;
                let answer = format!("{}", 10_000 + 10 * i + c);
                trajectories.push(TrajectoryRecord {
                    text: format!("query {i} path {j}: the answer is {answer}"),
                    answer,
                    embedding: add(&centers[c], &gaussian(&mut rng, spec.dim, spec.sigma_wide)),
                    token_probs: Some(token_probs(&mut rng, spec.tokens, false)),
                    token_entropies: None,
                });
            }
        }
        let flip = rng.random::<f64>() < spec.label_noise;
        let gold_answer = match (confident, flip) {
            (true, false) => gold,
            (true, true) => format!("{}", 100 + i + spec.n_samples),
            // a flipped uncertain sample's majority answer turns out right
            (false, true) => format!("{}", 10_000 + 10 * i),
            (false, false) => gold,
        };
        let mut sample = ReasoningSample::new(format!("q{i:05}"), format!("synthetic question {i}"), Some(gold_answer), trajectories);
        sample.modality = Some(spec.modality.clone());
        samples.push(sample);
    }
    Ok(Dataset { samples, embedding_dim: spec.dim, modality_tag: spec.modality.clone() })
}
