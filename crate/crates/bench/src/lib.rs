//! Fixtures shared by the benchmarks.

use msmkl::{gram, normalize_gram, FeatureMap, GramMatrix, KernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn descriptors(n: usize, len: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..len).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect()
}

/// Alternating ±1 labels.
pub fn labels(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// `m` normalized linear kernels over independent random descriptors.
pub fn kernels(n: usize, m: usize, len: usize) -> Vec<GramMatrix> {
    (0..m)
        .map(|s| normalize_gram(&gram(&descriptors(n, len, s as u64), &KernelSpec::Linear).unwrap()).unwrap())
        .collect()
}

pub fn feature_map(channels: usize, side: usize) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = (0..channels * side * side)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    FeatureMap::new(channels, side, data).unwrap()
}
