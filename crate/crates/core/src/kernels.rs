//! Kernel functions, Gram matrices and convex kernel combinations.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum KernelSpec {
    #[default]
    Linear,
    Gaussian {
        gamma: f64,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::config(format!("gaussian gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f32], y: &[f32]) -> f64 {
        match *self {
            KernelSpec::Linear => x.iter().zip(y).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum(),
            KernelSpec::Gaussian { gamma } => {
                let sq: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| {
                        let d = f64::from(a) - f64::from(b);
                        d * d
                    })
                    .sum();
                (-gamma * sq).exp()
            }
        }
    }
}

/// Symmetric `N x N` matrix of kernel evaluations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
    tag: String,
}

impl GramMatrix {
    /// Wraps a row-major matrix after checking shape, finiteness, symmetry
    /// (1e-12 relative) and a nonnegative diagonal.
    pub fn from_row_major(n: usize, data: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "gram data length {} is not {n}x{n}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gram matrix has non-finite entries"));
        }
        for i in 0..n {
            if data[i * n + i] < 0.0 {
                return Err(Error::invalid(format!("gram diagonal entry {i} is negative")));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!("gram matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            n,
            data,
            tag: tag.into(),
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> GramMatrix {
        let data = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        GramMatrix {
            n: idx.len(),
            data,
            tag: self.tag.clone(),
        }
    }

    /// Rectangular block `rows x cols`, one `Vec` per row.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|&i| cols.iter().map(|&j| self.get(i, j)).collect())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> GramMatrix {
        GramMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * factor).collect(),
            tag: self.tag.clone(),
        }
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::invalid("simplex weights are empty"));
        }
        if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("simplex weights must be nonnegative: {d:?}")));
        }
        let sum: f64 = d.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!("simplex weights sum to {sum}, not 1")));
        }
        Ok(Self(d))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn vertex(m: usize, k: usize) -> Self {
        let mut d = vec![0.0; m];
        d[k] = 1.0;
        Self(d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_lengths<X: AsRef<[f32]>>(xs: &[X], len: usize) -> Result<()> {
    if let Some((i, x)) = xs.iter().enumerate().find(|(_, x)| x.as_ref().len() != len) {
        return Err(Error::invalid(format!(
            "descriptor {i} has length {}, expected {len}",
            x.as_ref().len()
        )));
    }
    Ok(())
}

/// Gram matrix over `descriptors`. The upper triangle is computed and
/// mirrored, so the result is exactly symmetric.
pub fn gram<X: AsRef<[f32]> + Sync>(descriptors: &[X], spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    let n = descriptors.len();
    if n == 0 {
        return Err(Error::invalid("cannot build a gram matrix over zero samples"));
    }
    check_lengths(descriptors, descriptors[0].as_ref().len())?;
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = descriptors[i].as_ref();
            (i..n).map(|j| spec.eval(xi, descriptors[j].as_ref())).collect()
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    GramMatrix::from_row_major(n, data, "")
}

/// Kernel rows between `queries` and `basis`: `out[q][i] = k(query_q, basis_i)`.
pub fn cross_kernel<X, Y>(queries: &[X], basis: &[Y], spec: &KernelSpec) -> Result<Vec<Vec<f64>>>
where
    X: AsRef<[f32]> + Sync,
    Y: AsRef<[f32]> + Sync,
{
    spec.validate()?;
    let Some(first) = basis.first() else {
        return Ok(vec![Vec::new(); queries.len()]);
    };
    let len = first.as_ref().len();
    check_lengths(basis, len)?;
    check_lengths(queries, len)?;
    Ok(queries
        .par_iter()
        .map(|q| basis.iter().map(|b| spec.eval(q.as_ref(), b.as_ref())).collect())
        .collect())
}

/// Cosine normalization `K_ij / sqrt(K_ii K_jj)`; the diagonal becomes 1.
pub fn normalize_gram(g: &GramMatrix) -> Result<GramMatrix> {
    let diag = g.diagonal();
    if let Some(index) = diag.iter().position(|&v| v <= 0.0) {
        return Err(Error::DegenerateSample { index });
    }
    let scale: Vec<f64> = diag.iter().map(|v| v.sqrt()).collect();
    let n = g.order();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = if i == j {
                1.0
            } else {
                g.get(i, j) / (scale[i] * scale[j])
            };
        }
    }
    Ok(GramMatrix {
        n,
        data,
        tag: g.tag.clone(),
    })
}

/// Normalizes rectangular kernel rows given the self-similarities of the
/// queries and of the basis.
pub fn normalize_rows(rows: &mut [Vec<f64>], query_diag: &[f64], basis_diag: &[f64]) -> Result<()> {
    if let Some(index) = query_diag.iter().position(|&v| v <= 0.0) {
        return Err(Error::DegenerateSample { index });
    }
    if let Some(index) = basis_diag.iter().position(|&v| v <= 0.0) {
        return Err(Error::DegenerateSample { index });
    }
    for (row, &qd) in rows.iter_mut().zip(query_diag) {
        let qs = qd.sqrt();
        for (v, &bd) in row.iter_mut().zip(basis_diag) {
            *v /= qs * bd.sqrt();
        }
    }
    Ok(())
}

/// Entry-wise `sum_m weights[m] * grams[m]` for arbitrary nonnegative
/// weights. [`combine`] is the simplex-constrained form.
pub fn combine_weighted(grams: &[GramMatrix], weights: &[f64]) -> Result<GramMatrix> {
    let first = grams.first().ok_or_else(|| Error::invalid("no kernels to combine"))?;
    if grams.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} kernels but {} weights",
            grams.len(),
            weights.len()
        )));
    }
    let n = first.order();
    if let Some(g) = grams.iter().find(|g| g.order() != n) {
        return Err(Error::invalid(format!("kernel order mismatch: {} vs {n}", g.order())));
    }
    let mut data = vec![0.0; n * n];
    for (g, &w) in grams.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (acc, &v) in data.iter_mut().zip(&g.data) {
            *acc += w * v;
        }
    }
    Ok(GramMatrix {
        n,
        data,
        tag: "combined".into(),
    })
}

pub fn combine(grams: &[GramMatrix], d: &SimplexWeights) -> Result<GramMatrix> {
    combine_weighted(grams, d.as_slice())
}

/// Applies kernel weights to per-kernel rows of one sample.
pub fn combine_rows(rows: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let n = rows.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; n];
    for (row, &w) in rows.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (acc, &v) in out.iter_mut().zip(row.iter()) {
            *acc += w * v;
        }
    }
    out
}
