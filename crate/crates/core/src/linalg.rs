//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Dense rank-3 tensor with all three indices of length `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            dim: 1,
            data: vec![value],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Gradient of the Laplacian: `(∇Δ)_i = Σ_j T_ijj`.
    pub fn laplacian_gradient(&self) -> Vector {
        Vector::from_fn(self.dim, |i, _| (0..self.dim).map(|j| self.get(i, j, j)).sum())
    }

    /// Pushes a tensor on `R^r` forward to `R^d` through the columns of `basis` (d×r):
    /// `T_ijk = Σ U_ia U_jb U_kc t_abc`.
    pub fn lift(&self, basis: &Matrix) -> Tensor3 {
        let d = basis.nrows();
        let r = self.dim;
        assert_eq!(basis.ncols(), r, "basis columns must match tensor dimension");
        let mut out = Tensor3::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut acc = 0.0;
                    for a in 0..r {
                        let ua = basis[(i, a)];
                        if ua == 0.0 {
                            continue;
                        }
                        for b in 0..r {
                            let ub = basis[(j, b)];
                            for c in 0..r {
                                acc += ua * ub * basis[(k, c)] * self.get(a, b, c);
                            }
                        }
                    }
                    out.set(i, j, k, acc);
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_max_eigenvalue(m: &Matrix) -> (f64, f64) {
    let ev = sym_eigenvalues(m);
    (ev[0], ev[ev.len() - 1])
}

/// Largest eigenvalue of `AᵀA` by power iteration, stopped once successive
/// Rayleigh quotients agree to `rel_tol`.
pub fn power_iteration_gram(a: &Matrix, rel_tol: f64, max_iter: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // Deterministic start with no exact orthogonality to any eigenvector in practice.
    let mut v = Vector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = a.transpose() * (a * &v);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - estimate).abs() <= rel_tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

pub fn is_orthonormal_columns(basis: &Matrix, tol: f64) -> bool {
    let gram = basis.transpose() * basis;
    let id = Matrix::identity(basis.ncols(), basis.ncols());
    (gram - id).abs().max() <= tol
}
