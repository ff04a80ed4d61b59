//! Token statistics and Dirichlet-derived confidence.
//!
//! Entropies are in nats throughout.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma, mean, population_variance, sigmoid};

/// Lower and upper clip applied to the Dirichlet confidence.
pub const CONF_DIR_CLIP: (f64, f64) = (0.01, 0.99);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryStats {
    /// Population variance of the chosen-token probabilities.
    pub variance: f64,
    /// Mean per-token entropy.
    pub entropy: f64,
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * libm::log(x) } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Summarises one trajectory's token stream.
///
/// When per-token distribution entropies are not available the entropy falls
/// back to the mean binary entropy of the chosen-token probabilities.
pub fn trajectory_stats(token_probs: &[f64], token_entropies: Option<&[f64]>) -> Result<TrajectoryStats> {
    if token_probs.is_empty() {
        return Err(Error::EmptyTokenStream);
    }
    if let Some((index, &value)) = token_probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(Error::InvalidTokenStatistic { index, value });
    }
    let entropy = match token_entropies {
        Some(h) if !h.is_empty() => {
            if let Some((index, &value)) = h.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidTokenStatistic { index, value });
            }
            mean(h)
        }
        _ => token_probs.iter().map(|&p| binary_entropy(p)).sum::<f64>() / token_probs.len() as f64,
    };
    Ok(TrajectoryStats { variance: population_variance(token_probs), entropy })
}

/// Which form of the digamma-sum term to use in [`entropy_confidence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EntropyForm {
    /// `1 / (1 + Σ [ψ(α₀) − ψ(αᵢ)])`, always in `(0, 1]`.
    #[default]
    SignCorrected,
    /// `1 / (1 + Σ [ψ(αᵢ) − ψ(α₀)])`; can be negative or unbounded.
    /// Kept only for comparison runs.
    AsPrinted,
}

/// The four-dimensional Dirichlet feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirichletFeatures {
    /// α₀ = Σ αᵢ.
    pub concentration: f64,
    /// Differential entropy of Dir(α), nats.
    pub diff_entropy: f64,
    /// maxᵢ αᵢ / α₀.
    pub expected_max: f64,
    /// Variance of the argmax component's marginal.
    pub top_class_variance: f64,
}

impl DirichletFeatures {
    pub fn to_array(&self) -> [f64; 4] {
        [self.concentration, self.diff_entropy, self.expected_max, self.top_class_variance]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirichletProfile {
    pub alpha: Vec<f64>,
    pub features: DirichletFeatures,
    pub entropy_conf: f64,
    pub conf_dir: f64,
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    match alpha.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
        Some((index, &value)) => Err(Error::NonPositiveAlpha { index, value }),
        None => Ok(()),
    }
}

fn argmax(alpha: &[f64]) -> usize {
    let mut best = 0;
    for (i, &a) in alpha.iter().enumerate() {
        if a > alpha[best] {
            best = i;
        }
    }
    best
}

pub fn dirichlet_features(alpha: &[f64]) -> Result<DirichletFeatures> {
    check_alpha(alpha)?;
    let n = alpha.len() as f64;
    let a0: f64 = alpha.iter().sum();
    let ln_beta = alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(a0);
    let diff_entropy = ln_beta + (a0 - n) * digamma(a0)
        - alpha.iter().map(|&a| (a - 1.0) * digamma(a)).sum::<f64>();
    let top = alpha[argmax(alpha)];
    Ok(DirichletFeatures {
        concentration: a0,
        diff_entropy,
        expected_max: top / a0,
        top_class_variance: top * (a0 - top) / (a0 * a0 * (a0 + 1.0)),
    })
}

pub fn entropy_confidence(alpha: &[f64], form: EntropyForm) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let psi0 = digamma(a0);
    let spread: f64 = alpha.iter().map(|&a| psi0 - digamma(a)).sum();
    match form {
        EntropyForm::SignCorrected => 1.0 / (1.0 + spread),
        EntropyForm::AsPrinted => 1.0 / (1.0 - spread),
    }
}

/// Mean of expected max probability, σ(α₀ − n) and the entropy confidence,
/// clipped to `[0.01, 0.99]`.
pub fn dirichlet_confidence(alpha: &[f64], form: EntropyForm) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let n = alpha.len() as f64;
    let top = alpha[argmax(alpha)];
    let raw = (top / a0 + sigmoid(a0 - n) + entropy_confidence(alpha, form)) / 3.0;
    if raw.is_nan() {
        return CONF_DIR_CLIP.0;
    }
    raw.clamp(CONF_DIR_CLIP.0, CONF_DIR_CLIP.1)
}

pub fn dirichlet_profile(alpha: &[f64], form: EntropyForm) -> Result<DirichletProfile> {
    let features = dirichlet_features(alpha)?;
    Ok(DirichletProfile {
        alpha: alpha.to_vec(),
        features,
        entropy_conf: entropy_confidence(alpha, form),
        conf_dir: dirichlet_confidence(alpha, form),
    })
}
