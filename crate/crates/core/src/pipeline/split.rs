use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub train_per_class: usize,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, shuffle with seed `seed + r` and take the first
/// `train_per_class` samples for training. Index lists are sorted.
pub fn make_splits(ds: &Dataset, plan: &SplitPlan) -> Result<Vec<Split>> {
    if plan.repetitions == 0 {
        return Err(Error::invalid("at least one repetition is required"));
    }
    if plan.train_per_class == 0 {
        return Err(Error::invalid("train count per class must be positive"));
    }
    let per_class: Vec<Vec<usize>> = (0..ds.classes().len()).map(|k| ds.class_indices(k)).collect();
    for (k, idx) in per_class.iter().enumerate() {
        if plan.train_per_class >= idx.len() {
            return Err(Error::invalid(format!(
                "train count {} leaves no test samples in class '{}' of size {}",
                plan.train_per_class,
                ds.classes()[k],
                idx.len()
            )));
        }
    }
    Ok((0..plan.repetitions as u64)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(r));
            let mut train = Vec::new();
            let mut test = Vec::new();
            for idx in &per_class {
                let mut shuffled = idx.clone();
                shuffled.shuffle(&mut rng);
                let (a, b) = shuffled.split_at(plan.train_per_class);
                train.extend_from_slice(a);
                test.extend_from_slice(b);
            }
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect())
}
