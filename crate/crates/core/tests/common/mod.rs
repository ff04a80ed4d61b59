#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian cloud around a random offset; the scale varies per cloud so that
/// DBSCAN at ε = 0.5 sees everything from one blob to all noise.
pub fn random_cloud(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
    let scale = 0.05 + rng.random::<f64>() * 0.8;
    let offset: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    (0..k)
        .map(|_| {
            offset
                .iter()
                .map(|o| {
                    let z: f64 = StandardNormal.sample(rng);
                    o + scale * z
                })
                .collect()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
