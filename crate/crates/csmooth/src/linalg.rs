//! Thin wrappers over the dense factorizations used by the construction.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    /// Scales every nonzero row to unit Euclidean norm.
    pub fn normalize_rows(&mut self) {
        for i in 0..self.rows {
            let nrm = self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for j in 0..self.cols {
                    self.data[i * self.cols + j] /= nrm;
                }
            }
        }
    }
}

/// Result of a null-space computation.
#[derive(Debug, Clone)]
pub struct Kernel {
    /// Orthonormal kernel basis vectors.
    pub basis: Vec<Vec<f64>>,
    /// Singular values in nonincreasing order.
    pub singular_values: Vec<f64>,
    pub cutoff: f64,
    /// Smallest ratio sigma/cutoff among singular values on either side of
    /// the cutoff that lie within a factor 100 of it (None if none).
    pub near_cutoff: Option<f64>,
}

/// Kernel of `a` by a full singular value decomposition with relative
/// cutoff `rel_tol * sigma_max`.
pub fn kernel(a: &Dense, rel_tol: f64) -> Result<Kernel> {
    let cols = a.cols;
    if cols == 0 {
        return Ok(Kernel { basis: vec![], singular_values: vec![], cutoff: 0.0, near_cutoff: None });
    }
    // Pad with zero rows so that V is square and complete.
    let rows = a.rows.max(cols);
    let m = Mat::from_fn(rows, cols, |i, j| if i < a.rows { a.get(i, j) } else { 0.0 });
    let svd = m.svd().map_err(|e| Error::Singular(format!("svd failed: {e:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * smax;
    let v = svd.V();
    let mut basis = Vec::new();
    let mut near: Option<f64> = None;
    for (j, &s) in sv.iter().enumerate() {
        let ratio = if cutoff > 0.0 { s / cutoff } else { f64::INFINITY };
        if (0.01..100.0).contains(&ratio) && j < a.rows.min(cols) {
            near = Some(near.map_or(ratio, |r: f64| r.min(ratio)));
        }
        if s <= cutoff {
            basis.push((0..cols).map(|i| v[(i, j)]).collect());
        }
    }
    Ok(Kernel { basis, singular_values: sv, cutoff, near_cutoff: near })
}

/// Solves the square system A X = B (B given column-wise) after scaling
/// rows and columns to unit max-norm. Returns the solutions and the 2-norm
/// condition number of the scaled matrix.
pub fn solve_square(a: &Dense, rhs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let rs: Vec<f64> = (0..n)
        .map(|i| {
            let m = a.row(i).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if m > 0.0 { 1.0 / m } else { 1.0 }
        })
        .collect();
    let cs: Vec<f64> = (0..n)
        .map(|j| {
            let m = (0..n).fold(0.0_f64, |m, i| m.max((a.get(i, j) * rs[i]).abs()));
            if m > 0.0 { 1.0 / m } else { 1.0 }
        })
        .collect();
    let m = Mat::from_fn(n, n, |i, j| a.get(i, j) * rs[i] * cs[j]);
    let sv = m
        .singular_values()
        .map_err(|e| Error::Singular(format!("svd failed: {e:?}")))?;
    let cond = if sv.is_empty() {
        1.0
    } else if sv[n - 1] == 0.0 {
        f64::INFINITY
    } else {
        sv[0] / sv[n - 1]
    };
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Singular(format!("condition estimate {cond:.3e}")));
    }
    let lu = m.full_piv_lu();
    let b = Mat::from_fn(n, rhs.len(), |i, j| rhs[j][i] * rs[i]);
    let x = lu.solve(&b);
    Ok(((0..rhs.len()).map(|j| (0..n).map(|i| x[(i, j)] * cs[i]).collect()).collect(), cond))
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn symmetric_eigenvalues(a: &Dense) -> Result<Vec<f64>> {
    a.to_faer()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("eigenvalue computation failed: {e:?}")))
}

/// Least-squares residual of projecting `x` onto the span of orthonormal
/// vectors `basis`, relative to |x|.
pub fn projection_residual(basis: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut r = x.to_vec();
    for b in basis {
        let c: f64 = b.iter().zip(x).map(|(u, v)| u * v).sum();
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= c * bi;
        }
    }
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 {
        0.0
    } else {
        nr / nx
    }
}
