//! Experiment engine: datasets with per-scale descriptor blocks, repeated
//! random splits, one-vs-all training (single scale, stacked vector, MKL)
//! and accuracy reporting.

mod metrics;
mod ovr;
pub mod report;
mod split;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{gram, normalize_gram, GramMatrix, KernelSpec};
use crate::mkl::MklOptions;
use crate::svm::SolverOptions;

pub use metrics::{mean_std, ConfusionMatrix};
pub use ovr::{argmax, decision_values, fit_heads, predict, predict_rows, train_ovr, Head, OvrModel};
pub use split::{make_splits, Split, SplitPlan};

/// Samples with one descriptor per scale, aligned by sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    classes: Vec<String>,
    labels: Vec<usize>,
    ids: Vec<String>,
    scales: Vec<usize>,
    // [scale][sample] -> descriptor
    blocks: Vec<Vec<Vec<f32>>>,
}

impl Dataset {
    pub fn new(
        classes: Vec<String>,
        labels: Vec<usize>,
        scales: Vec<usize>,
        blocks: Vec<Vec<Vec<f32>>>,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::invalid("dataset has no classes"));
        }
        if blocks.len() != scales.len() || blocks.is_empty() {
            return Err(Error::invalid(format!(
                "{} descriptor blocks for {} scales",
                blocks.len(),
                scales.len()
            )));
        }
        let n = labels.len();
        if let Some(&l) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::invalid(format!("label {l} out of range")));
        }
        for (s, block) in blocks.iter().enumerate() {
            if block.len() != n {
                return Err(Error::invalid(format!(
                    "scale {} has {} descriptors for {n} samples",
                    scales[s],
                    block.len()
                )));
            }
            let len = block.first().map_or(0, Vec::len);
            if block.iter().any(|d| d.len() != len) {
                return Err(Error::invalid(format!(
                    "scale {} has descriptors of different lengths",
                    scales[s]
                )));
            }
        }
        for (k, name) in classes.iter().enumerate() {
            let count = labels.iter().filter(|&&l| l == k).count();
            if count < 2 {
                return Err(Error::invalid(format!(
                    "class '{name}' has {count} samples, at least 2 are required"
                )));
            }
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        Ok(Self {
            classes,
            labels,
            ids,
            scales,
            blocks,
        })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Self {
        assert_eq!(ids.len(), self.labels.len(), "one id per sample");
        self.ids = ids;
        self
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn block(&self, scale: usize) -> &[Vec<f32>] {
        &self.blocks[scale]
    }

    pub fn blocks(&self) -> &[Vec<Vec<f32>>] {
        &self.blocks
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }
}

/// How the per-scale descriptors are turned into a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// One scale only, by position in the dataset's scale list.
    Single(usize),
    /// Concatenated descriptors of every scale, one kernel.
    Stacked,
    /// One kernel per scale, fused by MKL per class.
    Mkl,
}

impl Method {
    pub fn name(&self, scales: &[usize]) -> String {
        match self {
            Method::Single(s) => format!("single-{}", scales[*s]),
            Method::Stacked => "sv".into(),
            Method::Mkl => "mkl".into(),
        }
    }

    /// The methods reported by an experiment, in table order.
    pub fn all(scales: usize) -> Vec<Method> {
        (0..scales)
            .map(Method::Single)
            .chain([Method::Stacked, Method::Mkl])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub kernel: KernelSpec,
    /// Cosine-normalize every kernel before training.
    pub normalize: bool,
    pub c: f64,
    pub svm: SolverOptions,
    pub mkl: MklOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Linear,
            normalize: true,
            c: 1.0,
            svm: SolverOptions::default(),
            mkl: MklOptions::default(),
        }
    }
}

impl TrainConfig {
    pub(crate) fn mkl_options(&self) -> MklOptions {
        MklOptions {
            svm: self.svm,
            ..self.mkl
        }
    }
}

pub(crate) fn concat_blocks(blocks: &[&[Vec<f32>]]) -> Vec<Vec<f32>> {
    let n = blocks.first().map_or(0, |b| b.len());
    (0..n)
        .map(|i| blocks.iter().flat_map(|b| b[i].iter().copied()).collect())
        .collect()
}

/// Full-dataset kernels, computed once and sliced per split.
#[derive(Debug, Clone)]
pub struct KernelBank {
    per_scale: Vec<GramMatrix>,
    stacked: GramMatrix,
}

impl KernelBank {
    pub fn new(ds: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        let build = |descs: &[Vec<f32>], tag: String| -> Result<GramMatrix> {
            let g = gram(descs, &cfg.kernel)?.with_tag(tag);
            if cfg.normalize {
                normalize_gram(&g)
            } else {
                Ok(g)
            }
        };
        let per_scale = ds
            .blocks
            .par_iter()
            .zip(&ds.scales)
            .map(|(b, s)| build(b, format!("scale-{s}")))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[Vec<f32>]> = ds.blocks.iter().map(Vec::as_slice).collect();
        let stacked = build(&concat_blocks(&refs), "stacked".into())?;
        Ok(Self { per_scale, stacked })
    }

    pub fn kernels(&self, method: Method) -> Vec<&GramMatrix> {
        match method {
            Method::Single(s) => vec![&self.per_scale[s]],
            Method::Stacked => vec![&self.stacked],
            Method::Mkl => self.per_scale.iter().collect(),
        }
    }
}

/// Which samples a trained model is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    Holdout,
    /// Score on the training samples themselves (smoke test).
    TrainingSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionResult {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Per class, the kernel weights of its head.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: String,
    pub train_count: usize,
    /// Overall accuracy of each repetition, as a fraction.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over repetitions.
    pub std: f64,
    pub per_class_accuracy: Vec<f64>,
    /// Confusion matrix of repetition 0.
    pub confusion: ConfusionMatrix,
    /// Per class, mean kernel weights over repetitions (MKL only).
    pub weights: Option<Vec<Vec<f64>>>,
}

/// Runs repeated split experiments against a precomputed [`KernelBank`].
pub struct Evaluator<'a> {
    ds: &'a Dataset,
    cfg: TrainConfig,
    bank: KernelBank,
}

impl<'a> Evaluator<'a> {
    pub fn new(ds: &'a Dataset, cfg: &TrainConfig) -> Result<Self> {
        Ok(Self {
            ds,
            cfg: *cfg,
            bank: KernelBank::new(ds, cfg)?,
        })
    }

    pub fn run_split(&self, split: &Split, method: Method, mode: EvalMode) -> Result<RepetitionResult> {
        let ds = self.ds;
        let k = ds.classes.len();
        let train = &split.train;
        let test = match mode {
            EvalMode::Holdout => &split.test,
            EvalMode::TrainingSet => &split.train,
        };
        let kernels = self.bank.kernels(method);
        let grams: Vec<GramMatrix> = kernels.iter().map(|g| g.submatrix(train)).collect();
        let labels: Vec<usize> = train.iter().map(|&i| ds.labels[i]).collect();
        let heads = fit_heads(&grams, &labels, k, method == Method::Mkl, &self.cfg)?;
        let rows: Vec<Vec<Vec<f64>>> = kernels.iter().map(|g| g.block(test, train)).collect();
        let predicted = predict_rows(&heads, &rows)?;
        let actual: Vec<usize> = test.iter().map(|&i| ds.labels[i]).collect();
        let confusion = ConfusionMatrix::from_predictions(ds.classes.clone(), &actual, &predicted)?;
        Ok(RepetitionResult {
            accuracy: confusion.overall_accuracy(),
            confusion,
            weights: heads.into_iter().map(|h| h.weights).collect(),
        })
    }

    pub fn evaluate(&self, plan: &SplitPlan, method: Method, mode: EvalMode) -> Result<ExperimentReport> {
        let splits = make_splits(self.ds, plan)?;
        let reps = splits
            .par_iter()
            .map(|s| self.run_split(s, method, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(aggregate(self.ds, method, plan.train_per_class, reps))
    }
}

fn aggregate(ds: &Dataset, method: Method, train_count: usize, reps: Vec<RepetitionResult>) -> ExperimentReport {
    let k = ds.classes.len();
    let r = reps.len() as f64;
    let accuracies: Vec<f64> = reps.iter().map(|x| x.accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    let per_class_accuracy = (0..k)
        .map(|c| reps.iter().map(|x| x.confusion.class_accuracy(c)).sum::<f64>() / r)
        .collect();
    let weights = (method == Method::Mkl).then(|| {
        (0..k)
            .map(|c| {
                let m = reps[0].weights[c].len();
                (0..m)
                    .map(|j| reps.iter().map(|x| x.weights[c][j]).sum::<f64>() / r)
                    .collect()
            })
            .collect()
    });
    ExperimentReport {
        method: method.name(&ds.scales),
        train_count,
        accuracies,
        mean,
        std,
        per_class_accuracy,
        confusion: reps.into_iter().next().expect("at least one repetition").confusion,
        weights,
    }
}

/// One method under one split plan.
pub fn evaluate(
    ds: &Dataset,
    plan: &SplitPlan,
    method: Method,
    cfg: &TrainConfig,
    mode: EvalMode,
) -> Result<ExperimentReport> {
    Evaluator::new(ds, cfg)?.evaluate(plan, method, mode)
}
