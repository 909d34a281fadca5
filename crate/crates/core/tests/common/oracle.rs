//! Exact solver for small SVM duals, independent of the SMO code path.
//!
//! Every assignment of each coefficient to {lower bound, upper bound, free}
//! is tried. On a face, the free coefficients and the equality multiplier
//! solve the stationarity system
//!
//! ```text
//! [ Q_FF  y_F ] [ a_F ]   [ 1 - Q_FB a_B ]
//! [ y_F'   0  ] [ nu  ] = [    -y_B' a_B  ]
//! ```
//!
//! An extreme point of the optimal set has a unique solution on its face, so
//! the best feasible stationary point over all faces is the optimum.

use msmkl::GramMatrix;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
}

const MAX_N: usize = 8;

pub fn dual_value(q: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alpha);
    a.sum() - 0.5 * a.dot(&(q * &a))
}

pub fn qp_oracle(k: &GramMatrix, y: &[f64], c: f64) -> Result<OracleSolution, String> {
    let n = y.len();
    if n > MAX_N {
        return Err(format!("oracle enumerates 3^N faces, N = {n} is above {MAX_N}"));
    }
    if k.order() != n {
        return Err("kernel and labels disagree in size".into());
    }
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k.get(i, j));
    let feas_tol = 1e-10 * (1.0 + c);
    let mut best: Option<OracleSolution> = None;
    let mut state = vec![0u8; n]; // 0 lower, 1 upper, 2 free

    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let fixed_eq: f64 = (0..n).filter(|&i| state[i] != 2).map(|i| y[i] * alpha[i]).sum();

        let candidate = if free.is_empty() {
            fixed_eq.abs() <= feas_tol
        } else {
            let f = free.len();
            let mut a = DMatrix::zeros(f + 1, f + 1);
            let mut b = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, f)] = y[i];
                a[(f, r)] = y[i];
                let fixed: f64 = (0..n).filter(|&j| state[j] != 2).map(|j| q[(i, j)] * alpha[j]).sum();
                b[r] = 1.0 - fixed;
            }
            b[f] = -fixed_eq;
            let x = a.clone().svd(true, true).solve(&b, 1e-12).map_err(|e| e.to_string())?;
            let residual = (&a * &x - &b).amax();
            let ok = residual <= 1e-9 * (1.0 + b.amax())
                && free
                    .iter()
                    .enumerate()
                    .all(|(r, _)| x[r] >= -feas_tol && x[r] <= c + feas_tol);
            if ok {
                for (r, &i) in free.iter().enumerate() {
                    alpha[i] = x[r].clamp(0.0, c);
                }
            }
            ok
        };
        if candidate {
            let objective = dual_value(&q, &alpha);
            if best.as_ref().is_none_or(|s| objective > s.objective) {
                best = Some(OracleSolution { alpha, objective });
            }
        }

        // next face in base 3
        let mut pos = 0;
        loop {
            if pos == n {
                return best.ok_or_else(|| "no feasible face".to_string());
            }
            state[pos] += 1;
            if state[pos] < 3 {
                break;
            }
            state[pos] = 0;
            pos += 1;
        }
    }
}
