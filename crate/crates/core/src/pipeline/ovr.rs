use rayon::prelude::*;

use super::{concat_blocks, Method, TrainConfig};
use crate::error::{Error, Result};
use crate::kernels::{combine_rows, cross_kernel, gram, normalize_gram, normalize_rows, GramMatrix, KernelSpec};
use crate::mkl::{mkl_train, MklProblem};
use crate::svm::{svm_solve, SvmModel, TrainSet};

/// One binary class-versus-rest classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    /// Kernel weights; a single `1.0` for one-kernel methods.
    pub weights: Vec<f64>,
    pub svm: SvmModel,
}

impl Head {
    fn score(&self, rows: &[&[f64]]) -> Result<f64> {
        let row = combine_rows(rows, &self.weights);
        self.svm.decision(&row)
    }
}

/// Trains one head per class on precomputed training kernels. With `mkl`
/// every class learns its own kernel weights; otherwise exactly one kernel
/// is expected.
pub fn fit_heads(
    grams: &[GramMatrix],
    labels: &[usize],
    classes: usize,
    mkl: bool,
    cfg: &TrainConfig,
) -> Result<Vec<Head>> {
    if classes < 2 {
        return Err(Error::invalid("one-vs-all needs at least two classes"));
    }
    if !mkl && grams.len() != 1 {
        return Err(Error::invalid(format!(
            "single-kernel training got {} kernels",
            grams.len()
        )));
    }
    for k in 0..classes {
        if !labels.contains(&k) {
            return Err(Error::invalid(format!("class {k} has zero training samples")));
        }
    }
    let opts = cfg.mkl_options();
    (0..classes)
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            let head = if mkl {
                let p = MklProblem::new(grams, &y, cfg.c)?;
                let model = mkl_train(&p, &opts)?;
                Head {
                    weights: model.weights.into_inner(),
                    svm: model.svm,
                }
            } else {
                let ts = TrainSet::new(&grams[0], &y, cfg.c)?;
                Head {
                    weights: vec![1.0],
                    svm: svm_solve(&ts, &cfg.svm)?,
                }
            };
            Ok(head)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e: Error| e.context("one-vs-all training"))
}

/// Per-head decision values for every sample; `rows[m][s]` is the kernel
/// row of sample `s` against the training set under kernel `m`.
pub fn decision_values(heads: &[Head], rows: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let samples = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != samples) {
        return Err(Error::invalid("kernel row blocks disagree on the sample count"));
    }
    if let Some(h) = heads.iter().find(|h| h.weights.len() != rows.len()) {
        return Err(Error::invalid(format!(
            "head expects {} kernels, got {}",
            h.weights.len(),
            rows.len()
        )));
    }
    (0..samples)
        .map(|s| {
            let sample_rows: Vec<&[f64]> = rows.iter().map(|r| r[s].as_slice()).collect();
            heads.iter().map(|h| h.score(&sample_rows)).collect()
        })
        .collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = k;
        }
    }
    best
}

pub fn predict_rows(heads: &[Head], rows: &[Vec<Vec<f64>>]) -> Result<Vec<usize>> {
    Ok(decision_values(heads, rows)?.iter().map(|s| argmax(s)).collect())
}

/// Multiclass model holding its training descriptors, so it can score new
/// samples directly.
#[derive(Debug, Clone)]
pub struct OvrModel {
    method: Method,
    kernel: KernelSpec,
    normalize: bool,
    scales: usize,
    // per kernel: training descriptors and their self-similarities
    basis: Vec<Vec<Vec<f32>>>,
    basis_diag: Vec<Vec<f64>>,
    heads: Vec<Head>,
}

impl OvrModel {
    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Decision values of every head for every sample.
    pub fn decision_values(&self, blocks: &[Vec<Vec<f32>>]) -> Result<Vec<Vec<f64>>> {
        if blocks.len() != self.scales {
            return Err(Error::invalid(format!(
                "model was trained on {} scales, got {}",
                self.scales,
                blocks.len()
            )));
        }
        let inputs = method_inputs(self.method, blocks)?;
        let rows = inputs
            .iter()
            .zip(&self.basis)
            .zip(&self.basis_diag)
            .map(|((q, basis), bdiag)| {
                let mut rows = cross_kernel(q, basis, &self.kernel)?;
                if self.normalize {
                    let qdiag: Vec<f64> = q.iter().map(|x| self.kernel.eval(x, x)).collect();
                    normalize_rows(&mut rows, &qdiag, bdiag)?;
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        decision_values(&self.heads, &rows)
    }
}

fn method_inputs(method: Method, blocks: &[Vec<Vec<f32>>]) -> Result<Vec<Vec<Vec<f32>>>> {
    Ok(match method {
        Method::Single(s) => vec![blocks
            .get(s)
            .ok_or_else(|| Error::invalid(format!("scale index {s} out of range")))?
            .clone()],
        Method::Stacked => {
            let refs: Vec<&[Vec<f32>]> = blocks.iter().map(Vec::as_slice).collect();
            vec![concat_blocks(&refs)]
        }
        Method::Mkl => blocks.to_vec(),
    })
}

/// Trains a one-vs-all model from per-scale training descriptors
/// (`blocks[scale][sample]`).
pub fn train_ovr(
    blocks: &[Vec<Vec<f32>>],
    labels: &[usize],
    classes: usize,
    method: Method,
    cfg: &TrainConfig,
) -> Result<OvrModel> {
    if blocks.iter().any(|b| b.len() != labels.len()) {
        return Err(Error::invalid("descriptor blocks are not aligned with the labels"));
    }
    let basis = method_inputs(method, blocks)?;
    let mut grams = Vec::with_capacity(basis.len());
    let mut basis_diag = Vec::with_capacity(basis.len());
    for b in &basis {
        let g = gram(b, &cfg.kernel)?;
        basis_diag.push(g.diagonal());
        grams.push(if cfg.normalize { normalize_gram(&g)? } else { g });
    }
    let heads = fit_heads(&grams, labels, classes, method == Method::Mkl, cfg)?;
    Ok(OvrModel {
        method,
        kernel: cfg.kernel,
        normalize: cfg.normalize,
        scales: blocks.len(),
        basis,
        basis_diag,
        heads,
    })
}

pub fn predict(model: &OvrModel, blocks: &[Vec<Vec<f32>>]) -> Result<Vec<usize>> {
    Ok(model.decision_values(blocks)?.iter().map(|s| argmax(s)).collect())
}
