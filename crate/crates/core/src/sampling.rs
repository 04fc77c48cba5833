//! Samplers for every distribution the mechanisms draw from.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Open01, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, Matrix, SymMatrix};
use crate::rng::RngStream;

#[inline]
pub fn standard_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Fills `out` with i.i.d. N(0, 1) draws.
pub fn fill_standard_normal(rng: &mut RngStream, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}

/// `rows × cols` matrix of i.i.d. N(0, σ²) entries, drawn in row-major order.
pub fn sample_gaussian_matrix(rng: &mut RngStream, rows: usize, cols: usize, sigma: f64) -> Matrix {
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        entries.push(sigma * standard_normal(rng));
    }
    Matrix::from_row_slice(rows, cols, &entries)
}

/// Symmetric matrix with i.i.d. N(0, σ²) entries on and above the diagonal.
pub fn sample_symmetric_gaussian(rng: &mut RngStream, dim: usize, sigma: f64) -> SymMatrix {
    SymMatrix::from_fn(dim, |_, _| sigma * standard_normal(rng))
}

/// One draw from the Laplace distribution with density `exp(-|x|/b) / 2b`.
pub fn sample_laplace(rng: &mut RngStream, scale: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    let centered = u - 0.5;
    let magnitude = -scale * libm::log(1.0 - 2.0 * centered.abs());
    if centered < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// χ² draw with `dof > 0` degrees of freedom (Gamma(dof/2, 2)).
pub fn sample_chi_squared(rng: &mut RngStream, dof: f64) -> Result<f64> {
    let dist = ChiSquared::new(dof).map_err(|_| invalid!("chi-squared dof must be positive, got {dof}"))?;
    Ok(dist.sample(rng))
}

/// Wishart law `W_d(V, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartSpec {
    pub scale: SymMatrix,
    pub dof: f64,
}

impl WishartSpec {
    pub fn new(scale: SymMatrix, dof: f64) -> Result<Self> {
        if !(dof >= 1.0 && dof.is_finite()) {
            return Err(invalid!("Wishart degrees of freedom must be >= 1, got {dof}"));
        }
        Ok(Self { scale, dof })
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    /// `E[W] = m V`.
    pub fn mean(&self) -> SymMatrix {
        self.scale.scaled(self.dof)
    }
}

fn scale_factor(scale: &SymMatrix) -> Result<Matrix> {
    cholesky(scale, 0.0)
        .map(|f| f.into_lower())
        .map_err(|e| match e {
            Error::Singular { min_pivot } => {
                invalid!("scale matrix is not positive definite (pivot {min_pivot:e})")
            }
            other => other,
        })
}

/// Lower-triangular Bartlett factor `T` with `T Tᵀ ~ W_d(I, m)`, `m > d - 1`.
fn bartlett_factor(rng: &mut RngStream, dim: usize, dof: f64) -> Result<Matrix> {
    let mut t = Matrix::zeros(dim, dim);
    for i in 0..dim {
        t[(i, i)] = libm::sqrt(sample_chi_squared(rng, dof - i as f64)?);
        for j in 0..i {
            t[(i, j)] = standard_normal(rng);
        }
    }
    Ok(t)
}

/// One draw from `W_d(V, m)`.
///
/// Uses the Bartlett decomposition `W = (L T)(L T)ᵀ` with `L = chol(V)` when
/// `m > d - 1`; a singular Wishart with integer `m < d` falls back to summing
/// `m` outer products.
pub fn sample_wishart(rng: &mut RngStream, spec: &WishartSpec) -> Result<SymMatrix> {
    let d = spec.dim();
    let l = scale_factor(&spec.scale)?;
    if spec.dof > (d as f64) - 1.0 {
        let t = bartlett_factor(rng, d, spec.dof)?;
        Ok(crate::linalg::outer_gram_of(&(l * t)))
    } else if libm::trunc(spec.dof) == spec.dof {
        wishart_outer_products(rng, &l, spec.dof as usize)
    } else {
        Err(invalid!(
            "non-integer Wishart dof {} must exceed d - 1 = {}",
            spec.dof,
            d - 1
        ))
    }
}

fn wishart_outer_products(rng: &mut RngStream, l: &Matrix, count: usize) -> Result<SymMatrix> {
    let d = l.nrows();
    let mut z = alloc::vec![0.0; d];
    let mut acc = crate::dataset::GramAccumulator::new(d);
    let mut row = alloc::vec![0.0; d];
    for _ in 0..count {
        fill_standard_normal(rng, &mut z);
        for i in 0..d {
            row[i] = (0..=i).map(|k| l[(i, k)] * z[k]).sum();
        }
        acc.push(&row);
    }
    Ok(acc.into_gram())
}

/// `W_d(V, m)` as the scatter matrix of `m` i.i.d. `N(0, V)` rows.
///
/// Reference construction, `O(m d²)`; integer `m` only.
pub fn sample_wishart_by_outer_products(rng: &mut RngStream, spec: &WishartSpec) -> Result<SymMatrix> {
    if libm::trunc(spec.dof) != spec.dof {
        return Err(invalid!("outer-product construction needs integer dof, got {}", spec.dof));
    }
    let l = scale_factor(&spec.scale)?;
    wishart_outer_products(rng, &l, spec.dof as usize)
}

/// One draw from the inverse-Wishart law `W⁻¹_d(Ψ, ν)`, `ν > d - 1`.
///
/// With `Ψ = L Lᵀ` and a Bartlett factor `T`, `Y = L⁻ᵀ T Tᵀ L⁻¹ ~ W_d(Ψ⁻¹, ν)`,
/// so `Y⁻¹ = (L T⁻ᵀ)(L T⁻ᵀ)ᵀ` is returned without forming `Ψ⁻¹` or `Y`.
pub fn sample_inverse_wishart(rng: &mut RngStream, scale: &SymMatrix, dof: f64) -> Result<SymMatrix> {
    let d = scale.dim();
    if !(dof > (d as f64) - 1.0 && dof.is_finite()) {
        return Err(invalid!("inverse-Wishart dof must exceed d - 1 = {}, got {dof}", d as f64 - 1.0));
    }
    let l = scale_factor(scale)?;
    let t = bartlett_factor(rng, d, dof)?;
    // Uᵀ = T⁻¹ Lᵀ
    let ut = t
        .solve_lower_triangular(&l.transpose())
        .ok_or_else(|| Error::Numeric(alloc::string::String::from("singular Bartlett factor")))?;
    Ok(crate::linalg::gram_of(&ut))
}
