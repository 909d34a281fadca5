//! Multiple kernel learning over the probability simplex.
//!
//! `J(d) = max_a W(a; sum_m d_m K_m)` is convex in `d` and is minimized by
//! alternating an exact SVM solve at fixed `d` with a reduced-gradient step
//! of `d`. The partial derivatives of `J` follow from the optimal `a`:
//! `dJ/dd_m = -1/2 sum_ij a_i a_j y_i y_j K_m(i, j)`.

use crate::error::{Error, Result};
use crate::kernels::{combine_weighted, GramMatrix, SimplexWeights};
use crate::svm::{svm_solve, svm_solve_from, SolverOptions, SvmModel, TrainSet};

/// Weights below this are treated as exactly zero.
const ZERO_WEIGHT: f64 = 1e-10;
/// Margin by which a zero weight's gradient must favor re-entry.
const RELEASE_MARGIN: f64 = 1e-8;
const MIN_MOVE: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy)]
pub struct MklProblem<'a> {
    grams: &'a [GramMatrix],
    labels: &'a [f64],
    c: f64,
}

impl<'a> MklProblem<'a> {
    pub fn new(grams: &'a [GramMatrix], labels: &'a [f64], c: f64) -> Result<Self> {
        let first = grams
            .first()
            .ok_or_else(|| Error::invalid("an MKL problem needs at least one kernel"))?;
        let n = first.order();
        if let Some(g) = grams.iter().find(|g| g.order() != n) {
            return Err(Error::invalid(format!(
                "kernel '{}' has order {}, expected {n}",
                g.tag(),
                g.order()
            )));
        }
        // validates labels and C
        TrainSet::new(first, labels, c)?;
        Ok(Self { grams, labels, c })
    }

    pub fn grams(&self) -> &'a [GramMatrix] {
        self.grams
    }

    pub fn labels(&self) -> &'a [f64] {
        self.labels
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn kernels(&self) -> usize {
        self.grams.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MklOptions {
    /// Initial line-search step, in units of the max-norm of the direction.
    pub step: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Options of the final SVM; inner solves use a tolerance of at most
    /// `min(1e-5, outer_tol / 10)`.
    pub svm: SolverOptions,
}

impl Default for MklOptions {
    fn default() -> Self {
        Self {
            step: 1.0,
            outer_tol: 1e-4,
            max_outer: 200,
            svm: SolverOptions::default(),
        }
    }
}

impl MklOptions {
    fn inner(&self) -> SolverOptions {
        SolverOptions {
            tol: self.svm.tol.min(1e-5).min(self.outer_tol / 10.0),
            record_trace: false,
            ..self.svm
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MklModel {
    pub weights: SimplexWeights,
    /// SVM trained on the combined kernel at the final weights.
    pub svm: SvmModel,
    /// Outer objective at each accepted iterate, starting with uniform weights.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `dJ/dd_m` for every kernel, given the optimal dual coefficients.
pub fn mkl_gradient(grams: &[GramMatrix], alpha: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} coefficients but {} labels",
            alpha.len(),
            labels.len()
        )));
    }
    let n = alpha.len();
    let coef: Vec<f64> = alpha.iter().zip(labels).map(|(a, y)| a * y).collect();
    grams
        .iter()
        .map(|g| {
            if g.order() != n {
                return Err(Error::invalid(format!(
                    "kernel order {} does not match {n} coefficients",
                    g.order()
                )));
            }
            let mut quad = 0.0;
            for (i, &ci) in coef.iter().enumerate() {
                if ci == 0.0 {
                    continue;
                }
                let row = g.row(i);
                quad += ci * coef.iter().zip(row).map(|(cj, k)| cj * k).sum::<f64>();
            }
            Ok(-0.5 * quad)
        })
        .collect()
}

/// Optimal dual value for an arbitrary nonnegative kernel weighting.
pub fn outer_objective_at(p: &MklProblem<'_>, weights: &[f64], opts: &SolverOptions) -> Result<f64> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("kernel weights must be nonnegative"));
    }
    let k = combine_weighted(p.grams, weights)?;
    let ts = TrainSet::new(&k, p.labels, p.c)?;
    Ok(svm_solve(&ts, opts)?.objective)
}

pub fn outer_objective(p: &MklProblem<'_>, d: &SimplexWeights, opts: &SolverOptions) -> Result<f64> {
    outer_objective_at(p, d.as_slice(), opts)
}

fn solve_at(p: &MklProblem<'_>, d: &[f64], opts: &SolverOptions, warm: Option<&[f64]>) -> Result<SvmModel> {
    let k = combine_weighted(p.grams, d)?;
    let ts = TrainSet::new(&k, p.labels, p.c)?;
    svm_solve_from(&ts, opts, warm)
}

/// Negative gradient projected onto `sum delta = 0` over the active
/// coordinates. Zero weights join the active set only when moving mass into
/// them lowers `J` by more than [`RELEASE_MARGIN`].
fn reduced_direction(d: &[f64], grad: &[f64]) -> Vec<f64> {
    let m = d.len();
    let mut active: Vec<bool> = d.iter().map(|&w| w > 0.0).collect();
    for _ in 0..=m {
        let count = active.iter().filter(|&&a| a).count();
        let mean = (0..m).filter(|&k| active[k]).map(|k| grad[k]).sum::<f64>() / count as f64;
        let next: Vec<bool> = (0..m).map(|k| d[k] > 0.0 || grad[k] < mean - RELEASE_MARGIN).collect();
        if next == active {
            return (0..m).map(|k| if active[k] { mean - grad[k] } else { 0.0 }).collect();
        }
        active = next;
    }
    let count = active.iter().filter(|&&a| a).count();
    let mean = (0..m).filter(|&k| active[k]).map(|k| grad[k]).sum::<f64>() / count as f64;
    (0..m).map(|k| if active[k] { mean - grad[k] } else { 0.0 }).collect()
}

/// Moves `d` along `dir` by `step`, snapping coordinates that reach the
/// boundary to zero and renormalizing onto the simplex.
fn step_on_simplex(d: &[f64], dir: &[f64], step: f64, max_step: f64) -> Vec<f64> {
    let mut next: Vec<f64> = d.iter().zip(dir).map(|(w, s)| w + step * s).collect();
    for (k, w) in next.iter_mut().enumerate() {
        let blocking = dir[k] < 0.0 && step >= max_step && d[k] / -dir[k] <= max_step;
        if blocking || *w < ZERO_WEIGHT {
            *w = 0.0;
        }
    }
    let sum: f64 = next.iter().sum();
    next.iter_mut().for_each(|w| *w /= sum);
    next
}

pub fn mkl_train(p: &MklProblem<'_>, opts: &MklOptions) -> Result<MklModel> {
    if !(opts.step > 0.0 && opts.outer_tol > 0.0) {
        return Err(Error::invalid("MKL step and tolerance must be positive"));
    }
    let m = p.kernels();
    if m == 1 {
        let ts = TrainSet::new(&p.grams[0], p.labels, p.c)?;
        let svm = svm_solve(&ts, &opts.svm)?;
        return Ok(MklModel {
            weights: SimplexWeights::uniform(1),
            trace: vec![svm.objective],
            svm,
            iterations: 0,
            converged: true,
        });
    }

    let inner = opts.inner();
    let context = |e: Error, d: &[f64]| e.context(format!("inner SVM solve at weights {d:?}"));

    let mut d = SimplexWeights::uniform(m).into_inner();
    let mut model = solve_at(p, &d, &inner, None).map_err(|e| context(e, &d))?;
    let mut trace = vec![model.objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_outer {
        iterations += 1;
        let grad = mkl_gradient(p.grams, &model.alpha, p.labels)?;
        let mut dir = reduced_direction(&d, &grad);
        let norm = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm == 0.0 {
            converged = true;
            break;
        }
        dir.iter_mut().for_each(|v| *v /= norm);
        let slope: f64 = grad.iter().zip(&dir).map(|(g, s)| g * s).sum();
        if slope >= 0.0 {
            converged = true;
            break;
        }
        let max_step = dir
            .iter()
            .zip(&d)
            .filter(|(s, _)| **s < 0.0)
            .map(|(s, w)| w / -s)
            .fold(f64::INFINITY, f64::min);

        let current = model.objective;
        let mut step = opts.step.min(max_step);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = step_on_simplex(&d, &dir, step, max_step);
            let cand_model = solve_at(p, &cand, &inner, Some(&model.alpha)).map_err(|e| context(e, &cand))?;
            if cand_model.objective < current {
                accepted = Some((cand, cand_model));
                break;
            }
            step *= 0.5;
        }
        let Some((mut cand, mut cand_model)) = accepted else {
            converged = true;
            break;
        };
        // Halving lands anywhere in (t*/2, 2t*) on a quadratic piece; try the
        // vertex of the parabola through J(0), J'(0) and J(step) as well.
        let curvature = (cand_model.objective - current - slope * step) / (step * step);
        if curvature > 0.0 {
            let vertex = (-slope / (2.0 * curvature)).min(max_step);
            if (vertex - step).abs() > 1e-3 * step {
                let alt = step_on_simplex(&d, &dir, vertex, max_step);
                let alt_model = solve_at(p, &alt, &inner, Some(&model.alpha)).map_err(|e| context(e, &alt))?;
                if alt_model.objective < cand_model.objective {
                    (cand, cand_model) = (alt, alt_model);
                }
            }
        }
        let moved = cand.iter().zip(&d).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let decrease = current - cand_model.objective;
        d = cand;
        model = cand_model;
        trace.push(model.objective);
        if decrease <= opts.outer_tol * (1.0 + model.objective.abs()) || moved < MIN_MOVE {
            converged = true;
            break;
        }
    }

    let weights = SimplexWeights::new(d)?;
    let svm =
        solve_at(p, weights.as_slice(), &opts.svm, Some(&model.alpha)).map_err(|e| context(e, weights.as_slice()))?;
    Ok(MklModel {
        weights,
        svm,
        trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelSpec};

    fn toy_gram(xs: &[[f32; 2]]) -> GramMatrix {
        gram(xs, &KernelSpec::Linear).unwrap()
    }

    fn labels() -> Vec<f64> {
        vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0]
    }

    fn informative() -> GramMatrix {
        toy_gram(&[
            [1.0, 0.2],
            [1.2, -0.1],
            [0.9, 0.4],
            [-1.0, 0.1],
            [-1.1, -0.3],
            [-0.8, 0.2],
        ])
    }

    fn noise() -> GramMatrix {
        toy_gram(&[
            [0.3, -1.0],
            [-0.5, 0.7],
            [0.9, 0.1],
            [0.2, 0.8],
            [-0.7, -0.4],
            [0.6, -0.6],
        ])
    }

    #[test]
    fn gradient_of_zero_alpha_is_zero() {
        let g = mkl_gradient(&[informative(), noise()], &[0.0; 6], &labels()).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_nonpositive_and_symmetric() {
        let a = [0.3, 0.1, 0.5, 0.2, 0.4, 0.3];
        let g = mkl_gradient(&[informative(), informative(), noise()], &a, &labels()).unwrap();
        assert_eq!(g[0], g[1]);
        assert!(g.iter().all(|&v| v <= 0.0));
        assert!(mkl_gradient(&[informative()], &a[..4], &labels()).is_err());
    }

    #[test]
    fn single_kernel_is_plain_svm() {
        let (grams, y) = (vec![informative()], labels());
        let p = MklProblem::new(&grams, &y, 1.0).unwrap();
        let model = mkl_train(&p, &MklOptions::default()).unwrap();
        assert_eq!(model.weights.as_slice(), &[1.0]);
        assert_eq!(model.iterations, 0);
        let ts = TrainSet::new(&p.grams()[0], p.labels(), 1.0).unwrap();
        let svm = svm_solve(&ts, &SolverOptions::default()).unwrap();
        assert_eq!(model.svm, svm);
    }

    #[test]
    fn duplicate_kernels_keep_uniform_weights() {
        let (grams, y) = (vec![informative(), informative()], labels());
        let p = MklProblem::new(&grams, &y, 1.0).unwrap();
        let model = mkl_train(&p, &MklOptions::default()).unwrap();
        assert_eq!(model.weights.as_slice(), &[0.5, 0.5]);
        assert!(model.converged);
    }

    #[test]
    fn informative_kernel_wins() {
        let (grams, y) = (vec![informative(), noise()], labels());
        let p = MklProblem::new(&grams, &y, 1.0).unwrap();
        let model = mkl_train(&p, &MklOptions::default()).unwrap();
        assert!(model.weights.as_slice()[0] > 0.5, "{:?}", model.weights);
        assert!(model.trace.windows(2).all(|w| w[1] <= w[0]));
        let s: f64 = model.weights.as_slice().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_objective_matches_single_kernel() {
        let (grams, y) = (vec![informative(), noise()], labels());
        let p = MklProblem::new(&grams, &y, 1.0).unwrap();
        let opts = SolverOptions::with_tol(1e-10);
        let j = outer_objective(&p, &SimplexWeights::vertex(2, 1), &opts).unwrap();
        let ts = TrainSet::new(&p.grams()[1], p.labels(), 1.0).unwrap();
        assert_eq!(j, svm_solve(&ts, &opts).unwrap().objective);
    }

    #[test]
    fn problem_validation() {
        let small = toy_gram(&[[1.0, 0.0], [0.0, 1.0]]);
        let y = labels();
        assert!(MklProblem::new(&[informative(), small], &y, 1.0).is_err());
        assert!(MklProblem::new(&[], &y, 1.0).is_err());
        assert!(MklProblem::new(&[informative()], &[1.0; 6], 1.0).is_err());
    }

    #[test]
    fn direction_sums_to_zero_and_respects_zeros() {
        let dir = reduced_direction(&[0.5, 0.5, 0.0], &[-1.0, -3.0, -0.5]);
        assert!(dir.iter().sum::<f64>().abs() < 1e-15);
        assert_eq!(dir[2], 0.0);
        let dir = reduced_direction(&[0.5, 0.5, 0.0], &[-1.0, -3.0, -9.0]);
        assert!(dir[2] > 0.0);
    }
}
