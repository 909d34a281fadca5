//! Soft-margin SVM dual solved by two-variable working-set ascent.
//!
//! Maximizes `W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij` subject to
//! `0 <= a_i <= C` and `sum a_i y_i = 0`. Each iteration picks the maximal
//! violating pair and solves the two-variable subproblem exactly, so the
//! equality constraint is preserved and `W` never decreases.

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;

/// Curvature floor for indefinite pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a> {
    gram: &'a GramMatrix,
    labels: &'a [f64],
    c: f64,
}

impl<'a> TrainSet<'a> {
    pub fn new(gram: &'a GramMatrix, labels: &'a [f64], c: f64) -> Result<Self> {
        if labels.len() != gram.order() {
            return Err(Error::invalid(format!(
                "{} labels for a gram matrix of order {}",
                labels.len(),
                gram.order()
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("box bound C must be positive, got {c}")));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid(format!("labels must be +1 or -1, got {y}")));
        }
        let pos = labels.iter().any(|&y| y > 0.0);
        let neg = labels.iter().any(|&y| y < 0.0);
        if !(pos && neg) {
            return Err(Error::invalid("both classes must be present in a binary problem"));
        }
        Ok(Self { gram, labels, c })
    }

    pub fn gram(&self) -> &'a GramMatrix {
        self.gram
    }

    pub fn labels(&self) -> &'a [f64] {
        self.labels
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Dual objective `W(alpha)` evaluated from scratch.
    pub fn objective(&self, alpha: &[f64]) -> f64 {
        dual_objective(self.gram, self.labels, alpha)
    }
}

pub fn dual_objective(gram: &GramMatrix, labels: &[f64], alpha: &[f64]) -> f64 {
    let n = labels.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = gram.row(i);
        let s: f64 = (0..n).map(|j| alpha[j] * labels[j] * row[j]).sum();
        quad += alpha[i] * labels[i] * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Maximal KKT violation `m(a) - M(a)` tolerated at termination.
    pub tol: f64,
    /// Defaults to `10_000 * N` when unset.
    pub max_iter: Option<usize>,
    /// Record `W` after every update (costs O(N) per iteration).
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: None,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub alpha: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub support: Vec<usize>,
    /// Dual objective at `alpha`.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Dual objective after each iteration, when requested.
    pub trace: Vec<f64>,
}

impl SvmModel {
    /// `sum_i alpha_i y_i row_i + b` for a kernel row against the training set.
    pub fn decision(&self, kernel_row: &[f64]) -> Result<f64> {
        decision(&self.alpha, &self.labels, self.bias, kernel_row)
    }

    pub fn sv_threshold(&self) -> f64 {
        1e-8 * self.c
    }
}

pub fn decision(alpha: &[f64], labels: &[f64], bias: f64, kernel_row: &[f64]) -> Result<f64> {
    if kernel_row.len() != alpha.len() || labels.len() != alpha.len() {
        return Err(Error::invalid(format!(
            "kernel row of length {} for a model with {} coefficients",
            kernel_row.len(),
            alpha.len()
        )));
    }
    Ok(alpha
        .iter()
        .zip(labels)
        .zip(kernel_row)
        .map(|((a, y), k)| a * y * k)
        .sum::<f64>()
        + bias)
}

pub fn svm_solve(ts: &TrainSet<'_>, opts: &SolverOptions) -> Result<SvmModel> {
    svm_solve_from(ts, opts, None)
}

/// Like [`svm_solve`], optionally starting from a feasible `alpha`.
pub fn svm_solve_from(ts: &TrainSet<'_>, opts: &SolverOptions, warm: Option<&[f64]>) -> Result<SvmModel> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::invalid(format!(
            "solver tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let n = ts.len();
    let c = ts.c;
    let y = ts.labels;
    let k = ts.gram;

    let mut alpha = match warm {
        Some(a) => {
            check_feasible(a, y, c)?;
            a.to_vec()
        }
        None => vec![0.0; n],
    };
    // grad[t] = (Q alpha)_t - 1 with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    for (i, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            let row = k.row(i);
            for t in 0..n {
                grad[t] += y[t] * y[i] * row[t] * a;
            }
        }
    }

    let max_iter = opts.max_iter.unwrap_or(10_000 * n);
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(ts.objective(&alpha));
    }
    let mut iterations = 0;
    let mut residual;
    loop {
        let (i, j, gap) = select_pair(&alpha, &grad, y, c);
        residual = gap;
        if gap <= opts.tol {
            break;
        }
        if iterations >= max_iter {
            let model = finish(ts, alpha, &grad, iterations, residual, trace);
            return Err(Error::Convergence {
                kkt_residual: residual,
                iterations,
                best: Box::new(model),
            });
        }
        let (i, j) = (i.expect("violating pair"), j.expect("violating pair"));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        update_pair(&mut alpha, &grad, y, k, c, i, j);
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        if di != 0.0 || dj != 0.0 {
            let (ri, rj) = (k.row(i), k.row(j));
            for t in 0..n {
                grad[t] += y[t] * (y[i] * ri[t] * di + y[j] * rj[t] * dj);
            }
        }
        iterations += 1;
        if opts.record_trace {
            trace.push(ts.objective(&alpha));
        }
    }
    Ok(finish(ts, alpha, &grad, iterations, residual, trace))
}

fn check_feasible(alpha: &[f64], y: &[f64], c: f64) -> Result<()> {
    if alpha.len() != y.len() {
        return Err(Error::invalid("warm start has the wrong length"));
    }
    if alpha.iter().any(|&a| !(0.0..=c).contains(&a)) {
        return Err(Error::invalid("warm start violates the box constraint"));
    }
    let eq: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
    if eq.abs() > 1e-8 * y.len() as f64 * c {
        return Err(Error::invalid("warm start violates the equality constraint"));
    }
    Ok(())
}

/// Maximal violating pair: `i` maximizes `-y_t G_t` over the up-set, `j`
/// minimizes it over the low-set. Returns the gap `m - M`.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> (Option<usize>, Option<usize>, f64) {
    let mut up = (None, f64::NEG_INFINITY);
    let mut low = (None, f64::INFINITY);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
        let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
        if in_up && v > up.1 {
            up = (Some(t), v);
        }
        if in_low && v < low.1 {
            low = (Some(t), v);
        }
    }
    let gap = if up.0.is_some() && low.0.is_some() {
        (up.1 - low.1).max(0.0)
    } else {
        0.0
    };
    (up.0, low.0, gap)
}

fn update_pair(alpha: &mut [f64], grad: &[f64], y: &[f64], k: &GramMatrix, c: f64, i: usize, j: usize) {
    let (kii, kjj, kij) = (k.get(i, i), k.get(j, j), k.get(i, j));
    if y[i] != y[j] {
        let quad = (kii + kjj - 2.0 * kij).max(TAU);
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if diff > 0.0 {
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = -diff;
        }
        if diff > 0.0 {
            if alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            }
        } else if alpha[j] > c {
            alpha[j] = c;
            alpha[i] = c + diff;
        }
    } else {
        let quad = (kii + kjj - 2.0 * kij).max(TAU);
        let delta = (grad[i] - grad[j]) / quad;
        let sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if sum > c {
            if alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            }
        } else if alpha[j] < 0.0 {
            alpha[j] = 0.0;
            alpha[i] = sum;
        }
        if sum > c {
            if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = sum;
        }
    }
}

/// Bias from the free support vectors; midpoint of the KKT bounds when
/// every coefficient sits at 0 or C.
fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        match (ub.is_finite(), lb.is_finite()) {
            (true, true) => 0.5 * (ub + lb),
            (true, false) => ub,
            (false, true) => lb,
            (false, false) => 0.0,
        }
    };
    -rho
}

fn finish(
    ts: &TrainSet<'_>,
    alpha: Vec<f64>,
    grad: &[f64],
    iterations: usize,
    kkt_residual: f64,
    trace: Vec<f64>,
) -> SvmModel {
    let c = ts.c;
    let threshold = 1e-8 * c;
    let support = (0..alpha.len()).filter(|&i| alpha[i] > threshold).collect();
    SvmModel {
        bias: bias(&alpha, grad, ts.labels, c),
        objective: ts.objective(&alpha),
        labels: ts.labels.to_vec(),
        c,
        support,
        iterations,
        kkt_residual,
        trace,
        alpha,
    }
}
