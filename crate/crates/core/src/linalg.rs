//! Small dense solvers for the reward model's least-squares problems.
//!
//! Systems here are tiny (at most a handful of unknowns), so everything is
//! row-major `Vec<f64>` with Cholesky for the well-posed case and a Jacobi
//! eigendecomposition pseudo-inverse when the normal matrix is singular.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt};

const RELATIVE_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LstsqSolution {
    pub x: Vec<f64>,
    /// The normal matrix was singular and the minimum-norm solution was used.
    pub rank_deficient: bool,
}

/// Accumulates the weighted normal equations `sum w a a^T x = sum w b a`.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    n: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
}

impl NormalEquations {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gram: vec![0.0; n * n],
            rhs: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: &[f64], target: f64, weight: f64) {
        debug_assert_eq!(row.len(), self.n);
        for i in 0..self.n {
            self.rhs[i] += weight * target * row[i];
            for j in 0..self.n {
                self.gram[i * self.n + j] += weight * row[i] * row[j];
            }
        }
    }

    pub fn solve(&self) -> LstsqSolution {
        match cholesky_solve(&self.gram, &self.rhs, self.n) {
            Some(x) => LstsqSolution {
                x,
                rank_deficient: false,
            },
            None => LstsqSolution {
                x: pinv_solve(&self.gram, &self.rhs, self.n),
                rank_deficient: true,
            },
        }
    }
}

/// Cholesky solve of a symmetric positive definite system. Returns `None`
/// when a pivot is numerically zero relative to the largest diagonal entry.
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let max_diag = (0..n).map(|i| abs(a[i * n + i])).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return None;
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= RELATIVE_RANK_TOL * max_diag {
                    return None;
                }
                l[i * n + i] = sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if abs(apq) < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (abs(theta) + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    (values, v)
}

/// Minimum-norm solution of `a x = b` for symmetric positive semidefinite `a`.
pub fn pinv_solve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let (values, vectors) = symmetric_eigen(a, n);
    let max_eig = values.iter().copied().map(abs).fold(0.0, f64::max);
    let mut x = vec![0.0; n];
    if max_eig == 0.0 {
        return x;
    }
    for (k, &lambda) in values.iter().enumerate() {
        if lambda <= RELATIVE_RANK_TOL * max_eig {
            continue;
        }
        let proj: f64 = (0..n).map(|i| vectors[i * n + k] * b[i]).sum();
        for i in 0..n {
            x[i] += vectors[i * n + k] * proj / lambda;
        }
    }
    x
}
