//! The Dirichlet head: a small fully connected network from interleaved
//! per-trajectory `(variance, entropy)` statistics to concentration
//! parameters `α = softplus(MLP(x)) + 1`.
//!
//! Gradients are computed by hand. Training minimises the evidential
//! squared-error Bayes risk
//!
//! ```text
//! L(α, y) = Σⱼ (yⱼ − pⱼ)² + pⱼ(1 − pⱼ)/(α₀ + 1),   pⱼ = αⱼ/α₀
//! ```
//!
//! over the first `m` outputs, where `m` is the number of answer classes of
//! the example (at most the head width `n`).

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dirichlet::TrajectoryStats;
use crate::error::{Error, Result};
use crate::special::{sigmoid, softplus};

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => libm::tanh(x),
        }
    }

    fn derivative(&self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = libm::tanh(pre);
                1.0 - t * t
            }
        }
    }
}

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(z + self.bias[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeadParameters {
    /// Trajectories per sample; the input width is `2k`.
    pub k: usize,
    /// Number of Dirichlet components emitted.
    pub n: usize,
    pub activation: Activation,
    pub layers: Vec<DenseLayer>,
}

fn layer_sizes(k: usize, n: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(2 * k);
    sizes.extend_from_slice(hidden);
    sizes.push(n);
    sizes
}

impl HeadParameters {
    /// All-zero parameters: every output is `softplus(0) + 1 = 1 + ln 2`.
    pub fn zeros(k: usize, n: usize) -> Self {
        Self::zeros_with(k, n, &DEFAULT_HIDDEN, Activation::Relu)
    }

    pub fn zeros_with(k: usize, n: usize, hidden: &[usize], activation: Activation) -> Self {
        let sizes = layer_sizes(k, n, hidden);
        let layers = sizes.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect();
        Self { k, n, activation, layers }
    }

    /// Seeded uniform initialisation (He for ReLU, Glorot for tanh), zero biases.
    pub fn seeded(k: usize, n: usize, seed: u64) -> Self {
        Self::seeded_with(k, n, &DEFAULT_HIDDEN, Activation::Relu, seed)
    }

    pub fn seeded_with(k: usize, n: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut params = Self::zeros_with(k, n, hidden, activation);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in params.layers.iter_mut() {
            let limit = match activation {
                Activation::Relu => libm::sqrt(6.0 / layer.inputs as f64),
                Activation::Tanh => libm::sqrt(6.0 / (layer.inputs + layer.outputs) as f64),
            };
            for w in layer.weights.iter_mut() {
                *w = (2.0 * uniform01(&mut rng) - 1.0) * limit;
            }
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        2 * self.k
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Checks layer shapes chain from `2k` to `n` and every value is finite.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.layers.is_empty() {
            return Err(Error::InvalidParameter("head needs k, n and at least one layer"));
        }
        let mut width = self.input_dim();
        for layer in &self.layers {
            if layer.inputs != width {
                return Err(Error::DimensionMismatch { expected: width, got: layer.inputs });
            }
            if layer.weights.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
                return Err(Error::InvalidParameter("layer buffer sizes disagree with shape"));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("head parameters must be finite"));
            }
            width = layer.outputs;
        }
        if width != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: width });
        }
        Ok(())
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), got: flat.len() });
        }
        let mut at = 0;
        for layer in self.layers.iter_mut() {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Raw network output (pre-softplus) plus the cached activations.
    fn forward_cached(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        if let Some(row) = input.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { row });
        }
        let last = self.layers.len() - 1;
        let mut activations = vec![input.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(activations.last().expect("input pushed"), &mut z);
            if i < last {
                activations.push(z.iter().map(|&v| self.activation.apply(v)).collect());
            }
            pre.push(z);
        }
        Ok(Trace { activations, pre })
    }

    /// Concentration parameters for one interleaved input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_cached(input)?;
        Ok(trace.output().iter().map(|&z| alpha_of(z)).collect())
    }
}

/// `softplus(z) + 1`, floored one ulp above 1 so that α > 1 survives
/// rounding for very negative `z`.
fn alpha_of(z: f64) -> f64 {
    1.0 + softplus(z).max(f64::EPSILON)
}

struct Trace {
    /// Layer inputs: `activations[i]` feeds layer `i`.
    activations: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
}

impl Trace {
    fn output(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Interleaves statistics as `[σ²₁, H₁, …, σ²ₖ, Hₖ]`.
pub fn head_input(stats: &[TrajectoryStats]) -> Vec<f64> {
    stats.iter().flat_map(|s| [s.variance, s.entropy]).collect()
}

pub fn head_forward(params: &HeadParameters, stats: &[TrajectoryStats]) -> Result<Vec<f64>> {
    if stats.len() != params.k {
        return Err(Error::DimensionMismatch { expected: params.k, got: stats.len() });
    }
    params.forward(&head_input(stats))
}

/// Training target over an example's answer classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Target {
    /// One-hot on the class holding the correct answer.
    Class(usize),
    /// No class is correct; spread the target evenly.
    Uniform,
}

impl Target {
    pub fn vector(&self, components: usize) -> Vec<f64> {
        match *self {
            Target::Class(c) => (0..components).map(|j| if j == c { 1.0 } else { 0.0 }).collect(),
            Target::Uniform => vec![1.0 / components as f64; components],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainExample {
    pub stats: Vec<TrajectoryStats>,
    /// Number of answer classes; the loss uses the first `components` outputs.
    pub components: usize,
    pub target: Target,
}

/// Evidential squared-error loss and its gradient with respect to `alpha`.
pub fn evidential_loss(alpha: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let s: f64 = alpha.iter().sum();
    let p: Vec<f64> = alpha.iter().map(|a| a / s).collect();
    let mut loss = 0.0;
    let mut var_sum = 0.0;
    // g = ∂L/∂p at fixed s
    let mut g = Vec::with_capacity(alpha.len());
    for (pj, yj) in p.iter().zip(target) {
        let var = pj * (1.0 - pj) / (s + 1.0);
        loss += (yj - pj) * (yj - pj) + var;
        var_sum += pj * (1.0 - pj);
        g.push(-2.0 * (yj - pj) + (1.0 - 2.0 * pj) / (s + 1.0));
    }
    let g_dot_p: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
    let d_s = -var_sum / ((s + 1.0) * (s + 1.0));
    let grad = g.iter().map(|gi| (gi - g_dot_p) / s + d_s).collect();
    (loss, grad)
}

fn check_example(params: &HeadParameters, ex: &TrainExample) -> Result<()> {
    if ex.stats.len() != params.k {
        return Err(Error::DimensionMismatch { expected: params.k, got: ex.stats.len() });
    }
    if ex.components == 0 || ex.components > params.n {
        return Err(Error::InconsistentN { expected: params.n, got: ex.components });
    }
    if let Target::Class(c) = ex.target {
        if c >= ex.components {
            return Err(Error::InconsistentN { expected: ex.components, got: c + 1 });
        }
    }
    Ok(())
}

pub fn example_loss(params: &HeadParameters, ex: &TrainExample) -> Result<f64> {
    check_example(params, ex)?;
    let alpha = head_forward(params, &ex.stats)?;
    let m = ex.components;
    Ok(evidential_loss(&alpha[..m], &ex.target.vector(m)).0)
}

/// Loss of one example and its gradient in [`HeadParameters::to_flat`] layout.
pub fn loss_and_gradient(params: &HeadParameters, ex: &TrainExample) -> Result<(f64, Vec<f64>)> {
    check_example(params, ex)?;
    let trace = params.forward_cached(&head_input(&ex.stats))?;
    let out = trace.output();
    let m = ex.components;
    let alpha: Vec<f64> = out[..m].iter().map(|&z| alpha_of(z)).collect();
    let (loss, d_alpha) = evidential_loss(&alpha, &ex.target.vector(m));

    // ∂α/∂z = σ(z); outputs past `m` do not enter the loss
    let mut delta: Vec<f64> = (0..params.n)
        .map(|i| if i < m && softplus(out[i]) > f64::EPSILON { d_alpha[i] * sigmoid(out[i]) } else { 0.0 })
        .collect();

    let mut layer_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(params.layers.len());
    for li in (0..params.layers.len()).rev() {
        let layer = &params.layers[li];
        let input = &trace.activations[li];
        let mut gw = vec![0.0; layer.weights.len()];
        for o in 0..layer.outputs {
            let d = delta[o];
            if d != 0.0 {
                for (g, x) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                    *g = d * x;
                }
            }
        }
        let gb = delta.clone();
        if li > 0 {
            let mut prev = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, &z) in prev.iter_mut().zip(&trace.pre[li - 1]) {
                *p *= params.activation.derivative(z);
            }
            delta = prev;
        }
        layer_grads.push((gw, gb));
    }
    layer_grads.reverse();
    let mut flat = Vec::with_capacity(params.num_params());
    for (gw, gb) in layer_grads {
        flat.extend(gw);
        flat.extend(gb);
    }
    Ok((loss, flat))
}

pub fn mean_loss(params: &HeadParameters, examples: &[TrainExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut total = 0.0;
    for ex in examples {
        total += example_loss(params, ex)?;
    }
    Ok(total / examples.len() as f64)
}

/// Mini-batch training with the Adam update rule.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingSpec {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self { epochs: 50, learning_rate: 1e-3, batch_size: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: HeadParameters,
    /// Mean training loss before training and after each epoch.
    pub loss_history: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

pub fn train_head(params: HeadParameters, examples: &[TrainExample], spec: &TrainingSpec) -> Result<TrainOutcome> {
    if !(spec.learning_rate > 0.0 && spec.learning_rate.is_finite()) {
        return Err(Error::InvalidHyper("learning rate must be positive"));
    }
    if spec.batch_size == 0 {
        return Err(Error::InvalidHyper("batch size must be positive"));
    }
    params.validate()?;
    for ex in examples {
        check_example(&params, ex)?;
    }
    let initial = mean_loss(&params, examples)?;
    let mut history = vec![initial];
    if spec.epochs == 0 {
        return Ok(TrainOutcome { params, loss_history: history });
    }

    let mut params = params;
    let mut theta = params.to_flat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    for _ in 0..spec.epochs {
        for i in (1..order.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        for batch in order.chunks(spec.batch_size) {
            let mut grad = vec![0.0; theta.len()];
            for &idx in batch {
                let (_, g) = loss_and_gradient(&params, &examples[idx])?;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let bc1 = 1.0 - libm::pow(ADAM_BETA1, step as f64);
            let bc2 = 1.0 - libm::pow(ADAM_BETA2, step as f64);
            for i in 0..theta.len() {
                let g = grad[i] * scale;
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                theta[i] -= spec.learning_rate * (m[i] / bc1) / (libm::sqrt(v[i] / bc2) + ADAM_EPS);
            }
            params.set_flat(&theta)?;
        }
        history.push(mean_loss(&params, examples)?);
    }
    Ok(TrainOutcome { params, loss_history: history })
}
