//! Dense symmetric matrices and the spectral utilities used by every mechanism.
//!
//! [`SymMatrix`] stores only the upper triangle, so symmetry holds bit-for-bit
//! no matter how an entry was written. General rectangular work uses
//! nalgebra's [`DMatrix`](nalgebra::DMatrix) through the [`Matrix`] alias.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Dense column-major real matrix.
pub type Matrix = DMatrix<f64>;

/// Relative pivot tolerance used by [`default_pd_tolerance`].
pub const PD_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Real symmetric `dim × dim` matrix with packed upper-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    upper: Vec<f64>,
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * dim - i + 1) / 2 + (j - i)
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, c);
        }
        m
    }

    pub fn diagonal_from(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` for `i <= j` only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        Self { dim, upper }
    }

    /// Reads the upper triangle of a square matrix; the lower triangle is ignored.
    pub fn from_upper(m: &Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    /// Symmetrizes a square matrix as `(M + Mᵀ) / 2`.
    pub fn from_dense_averaged(m: &Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    /// Parses a row-major square matrix, requiring exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid!("matrix rows must all have length {dim}"));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if rows[i][j] != rows[j][i] {
                    return Err(invalid!("matrix is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed_index(self.dim, i, j)]
    }

    /// Writes entry `(i, j)` and, implicitly, `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = packed_index(self.dim, i, j);
        self.upper[k] = value;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, value: f64) {
        let k = packed_index(self.dim, i, j);
        self.upper[k] += value;
    }

    /// Packed upper triangle, row by row.
    pub fn packed(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.get(i, j);
                acc += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        libm::sqrt(acc)
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(invalid!("dimension mismatch: {} vs {}", self.dim, other.dim));
        }
        Ok(Self {
            dim: self.dim,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            upper: self.upper.iter().map(|v| v * c).collect(),
        }
    }

    /// Returns `self + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.add_at(i, i, c);
        }
        m
    }

    /// Principal submatrix on the given (ordered) indices.
    pub fn principal(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |a, b| self.get(indices[a], indices[b]))
    }

    /// Entries `M[rows[a], col]`.
    pub fn column_entries(&self, rows: &[usize], col: usize) -> Vec<f64> {
        rows.iter().map(|&r| self.get(r, col)).collect()
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += self.get(i, i) * v[i] * v[i];
            for j in (i + 1)..self.dim {
                acc += 2.0 * self.get(i, j) * v[i] * v[j];
            }
        }
        acc
    }

    /// `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

/// Gram matrix `BᵀB` of an arbitrary dense matrix.
pub fn gram_of(b: &Matrix) -> SymMatrix {
    let cols = b.ncols();
    SymMatrix::from_fn(cols, |i, j| b.column(i).dot(&b.column(j)))
}

/// `B Bᵀ`.
pub fn outer_gram_of(b: &Matrix) -> SymMatrix {
    let rows = b.nrows();
    SymMatrix::from_fn(rows, |i, j| b.row(i).dot(&b.row(j)))
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: Matrix,
    min_pivot: f64,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn into_lower(self) -> Matrix {
        self.lower
    }

    /// Smallest Schur-complement pivot met during the factorization.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= l[(i, k)] * y[k];
            }
            y[i] = acc / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in (i + 1)..n {
                acc -= l[(k, i)] * y[k];
            }
            y[i] = acc / l[(i, i)];
        }
        y
    }

    /// `M⁻¹`, symmetrized by construction.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim();
        let l_inv = self
            .lower
            .clone()
            .solve_lower_triangular(&Matrix::identity(n, n))
            .expect("Cholesky factor has a positive diagonal");
        // M⁻¹ = L⁻ᵀ L⁻¹
        gram_of(&l_inv)
    }

    pub fn log_determinant(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * libm::log(self.lower[(i, i)]))
            .sum()
    }
}

/// Cholesky factorization that fails unless every pivot exceeds `pivot_floor`.
pub fn cholesky(m: &SymMatrix, pivot_floor: f64) -> Result<CholeskyFactor> {
    let n = m.dim();
    let mut l = Matrix::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut pivot = m.get(j, j);
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        min_pivot = min_pivot.min(pivot);
        // negated comparison also rejects NaN
        if !(pivot > pivot_floor) {
            return Err(Error::Singular { min_pivot: pivot });
        }
        let diag = libm::sqrt(pivot);
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut acc = m.get(i, j);
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / diag;
        }
    }
    Ok(CholeskyFactor { lower: l, min_pivot })
}

/// Scale-aware pivot tolerance: `1e-10 × max diagonal entry` (zero for non-positive diagonals).
pub fn default_pd_tolerance(m: &SymMatrix) -> f64 {
    let max_diag = m.max_diagonal();
    if max_diag > 0.0 {
        PD_RELATIVE_TOLERANCE * max_diag
    } else {
        0.0
    }
}

/// True iff a Cholesky factorization succeeds with every pivot `> tol`.
pub fn is_positive_definite(m: &SymMatrix, tol: f64) -> bool {
    cholesky(m, tol).is_ok()
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

const EIGEN_MAX_ITERATIONS: usize = 10_000;

pub fn symmetric_eigen(m: &SymMatrix) -> Result<Eigen> {
    let n = m.dim();
    let decomposition = SymmetricEigen::try_new(m.to_dense(), f64::EPSILON, EIGEN_MAX_ITERATIONS)
        .ok_or_else(|| Error::Numeric(format!("symmetric eigensolver did not converge (d={n})")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomposition.eigenvalues[a]
            .partial_cmp(&decomposition.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&k| decomposition.eigenvalues[k]).collect();
    let vectors = Matrix::from_fn(n, n, |i, c| decomposition.eigenvectors[(i, order[c])]);
    Ok(Eigen { values, vectors })
}

/// Rebuilds `V diag(values) Vᵀ`.
pub fn from_eigen(vectors: &Matrix, values: &[f64]) -> SymMatrix {
    let n = vectors.nrows();
    SymMatrix::from_fn(n, |i, j| {
        (0..values.len())
            .map(|k| vectors[(i, k)] * values[k] * vectors[(j, k)])
            .sum()
    })
}

/// Least singular value of a symmetric matrix.
///
/// With `psd_hint` the smallest eigenvalue is returned as-is (it may be a tiny
/// negative number from rounding); otherwise the smallest eigenvalue magnitude.
pub fn min_singular_value(m: &SymMatrix, psd_hint: bool) -> Result<f64> {
    if m.dim() == 0 {
        return Err(invalid!("empty matrix"));
    }
    let eig = symmetric_eigen(m)?;
    if psd_hint {
        Ok(eig.values[0])
    } else {
        Ok(eig.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
    }
}

/// Spectral norm `max |λ|`.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    let eig = symmetric_eigen(m)?;
    Ok(eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Frobenius-nearest positive semidefinite matrix: negative eigenvalues clamped to zero.
pub fn project_psd(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = symmetric_eigen(m)?;
    let clamped: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    Ok(from_eigen(&eig.vectors, &clamped))
}
