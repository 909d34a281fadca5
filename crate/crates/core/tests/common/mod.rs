#![allow(dead_code)]

pub mod oracle;

use msmkl::{gram, Dataset, GramMatrix, KernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

/// Random ±1 labels with both classes present.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[n - 1] = -1.0;
    y
}

/// A random binary problem: points, labels, and the Gram matrix of `kernel`.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, kernel: &KernelSpec) -> (GramMatrix, Vec<f64>) {
    let dim = rng.random_range(1..=4);
    let y = random_labels(rng, n);
    let mut x = gaussian_points(rng, n, dim);
    // mild class shift so problems range from separable to overlapping
    let shift: f32 = rng.random_range(0.0..1.5);
    for (xi, yi) in x.iter_mut().zip(&y) {
        xi[0] += shift * *yi as f32;
    }
    (gram(&x, kernel).unwrap(), y)
}

/// `m` independent kernels over the same labelled samples, each from its own
/// feature view with its own signal strength.
pub fn random_mkl_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<GramMatrix>, Vec<f64>) {
    let y = random_labels(rng, n);
    let grams = (0..m)
        .map(|_| {
            let dim = rng.random_range(2..=4);
            let shift: f32 = rng.random_range(0.0..2.0);
            let mut x = gaussian_points(rng, n, dim);
            for (xi, yi) in x.iter_mut().zip(&y) {
                xi[0] += shift * *yi as f32;
            }
            let kernel = if rng.random_bool(0.5) {
                KernelSpec::Linear
            } else {
                KernelSpec::Gaussian {
                    gamma: rng.random_range(0.1..1.0),
                }
            };
            gram(&x, &kernel).unwrap()
        })
        .collect();
    (grams, y)
}

pub const NOISE_SCALE: usize = 0;

/// Three classes, three scales. Scale 0 is label-independent noise with more
/// energy than the signal; scales 1 and 2 carry class-dependent means.
pub fn multiscale_dataset(per_class: usize, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let classes = 3;
    let dims = [24, 16, 20];
    let means: Vec<Vec<Vec<f32>>> = dims.iter().map(|&d| gaussian_points(&mut rng, classes, d)).collect();
    let labels: Vec<usize> = (0..classes).flat_map(|k| std::iter::repeat_n(k, per_class)).collect();
    let blocks = (0..3)
        .map(|s| {
            labels
                .iter()
                .map(|&k| {
                    (0..dims[s])
                        .map(|j| {
                            let e: f32 = StandardNormal.sample(&mut rng);
                            match s {
                                NOISE_SCALE => 3.0 * e,
                                _ => 0.9 * means[s][k][j] + e,
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Dataset::new(
        (0..classes).map(|k| format!("class{k}")).collect(),
        labels,
        vec![64, 96, 128],
        blocks,
    )
    .unwrap()
}
