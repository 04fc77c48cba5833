//! Gaussian-projection mechanisms with a ridge of width `w`.

use super::calibration::{adaptive_jl_width_squared, jl_width, rows_within_budget, sv_estimate_from};
use super::{Branch, Calibration, GramEstimate, Input, MechanismId, SvPin};
use crate::dataset::{PrivacyBudget, SecondMoment};
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, gram_of, min_singular_value, symmetric_eigen, Matrix, SymMatrix};
use crate::rng::RngStream;
use crate::sampling::{fill_standard_normal, sample_laplace, sample_wishart, WishartSpec};

/// Some `F` with `F Fᵀ = m` for a positive semidefinite `m`.
pub(super) fn psd_factor(m: &SymMatrix) -> Result<Matrix> {
    if let Ok(f) = cholesky(m, 0.0) {
        return Ok(f.into_lower());
    }
    let eig = symmetric_eigen(m)?;
    let roots: alloc::vec::Vec<f64> = eig.values.iter().map(|&v| libm::sqrt(v.max(0.0))).collect();
    Ok(Matrix::from_fn(m.dim(), m.dim(), |i, j| eig.vectors[(i, j)] * roots[j]))
}

/// `(1/r)(R A′)ᵀ(R A′)` with `A′ = [A; w I]` and `R` an `r`-row standard
/// Gaussian matrix; `w = 0` drops the ridge rows entirely.
///
/// Raw rows are multiplied by an explicit `R`, streamed one row at a time.
/// For a second-moment input the sketch is drawn through its law: the rows
/// of `R A′` are i.i.d. `N(0, A′ᵀA′)`, so `(RA′)ᵀ(RA′) ~ W_d(A′ᵀA′, r)`.
pub(super) fn gaussian_sketch(input: Input<'_>, w: f64, r: usize, rng: &mut RngStream) -> Result<SymMatrix> {
    if r == 0 {
        return Err(invalid!("projection needs at least one row"));
    }
    let d = input.dim();
    let raw = match input {
        Input::Rows(a) => {
            let mut sketch = Matrix::zeros(r, d);
            let mut g = alloc::vec![0.0; r];
            for row in a.iter_rows() {
                fill_standard_normal(rng, &mut g);
                for (j, &x) in row.iter().enumerate() {
                    if x != 0.0 {
                        for (s, gk) in sketch.column_mut(j).iter_mut().zip(&g) {
                            *s += x * gk;
                        }
                    }
                }
            }
            if w > 0.0 {
                for j in 0..d {
                    fill_standard_normal(rng, &mut g);
                    for (s, gk) in sketch.column_mut(j).iter_mut().zip(&g) {
                        *s += w * gk;
                    }
                }
            }
            gram_of(&sketch)
        }
        Input::Moment(m) => {
            let sigma = m.gram().shifted(w * w);
            let f = psd_factor(&sigma)?;
            let spec = WishartSpec::new(SymMatrix::identity(d), r as f64)?;
            let core = sample_wishart(rng, &spec)?.to_dense();
            SymMatrix::from_dense_averaged(&(&f * core * f.transpose()))?
        }
    };
    Ok(raw.scaled(1.0 / r as f64))
}

/// Fixed-row projection mechanism: releases `(1/r)(RA′)ᵀ(RA′)` for `A′ = [A; wI]`.
pub fn ridge_jl<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    r: usize,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    let input = input.into();
    let d = input.dim();
    if r <= d {
        return Err(invalid!("ridge-jl needs more rows than columns: r = {r}, d = {d}"));
    }
    let b = input.row_bound();
    let w = jl_width(b, r, budget);
    let matrix = gaussian_sketch(input, w, r, rng)?;
    let calibration = Calibration {
        row_bound: Some(b),
        w: Some(w),
        r: Some(r as u64),
        ..Default::default()
    };
    Ok(GramEstimate::new(matrix, MechanismId::RidgeJl, calibration, rng.master_seed()))
}

fn sv_estimate(moment: &SecondMoment, budget: &PrivacyBudget, rng: &mut RngStream, pin: Option<SvPin>) -> Result<f64> {
    if let Some(SvPin::Estimate(s)) = pin {
        return Ok(s.max(0.0));
    }
    let b = moment.row_bound();
    let sigma_min = min_singular_value(moment.gram(), true)?;
    let z = match pin {
        Some(SvPin::Laplace(z)) => z,
        _ => sample_laplace(rng, 2.0 * b * b / budget.epsilon()),
    };
    Ok(sv_estimate_from(sigma_min, b, budget, z))
}

/// Private lower estimate of `σ_min(AᵀA)`:
/// `max{0, σ_min − 2B² ln(2/δ)/ε + Z}` with `Z ~ Lap(2B²/ε)`.
pub fn private_sv_estimate<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    rng: &mut RngStream,
) -> Result<f64> {
    sv_estimate(&input.into().moment(), budget, rng, None)
}

pub(super) fn sv_estimate_for(
    input: Input<'_>,
    budget: &PrivacyBudget,
    rng: &mut RngStream,
    pin: Option<SvPin>,
) -> Result<f64> {
    sv_estimate(&input.moment(), budget, rng, pin)
}

/// Data-adaptive projection mechanism.
///
/// The ridge `w² = (8B²/ε)(√(2r₀ ln(8/δ)) + ln(8/δ))` is reduced by the
/// private estimate `s` of `σ_min(AᵀA)`. If some ridge remains, `r₀` rows
/// are used; otherwise the largest row count whose budget curve stays below
/// `s` is used with no ridge at all.
pub fn ridge_jl_adaptive<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    r0: usize,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    ridge_jl_adaptive_pinned(input, budget, r0, rng, None)
}

#[doc(hidden)]
pub fn ridge_jl_adaptive_pinned<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    r0: usize,
    rng: &mut RngStream,
    pin: Option<SvPin>,
) -> Result<GramEstimate> {
    let input = input.into();
    let d = input.dim();
    if r0 == 0 {
        return Err(invalid!("r0 must be positive"));
    }
    let b = input.row_bound();
    let w2 = adaptive_jl_width_squared(b, r0, budget);
    let s = sv_estimate_for(input, budget, rng, pin)?;
    let remaining = (w2 - s).max(0.0);
    let mut calibration = Calibration {
        row_bound: Some(b),
        s: Some(s),
        ..Default::default()
    };
    let matrix = if remaining > 0.0 {
        if r0 <= d {
            return Err(invalid!("ridge-jl-adaptive needs r0 > d: r0 = {r0}, d = {d}"));
        }
        let w = libm::sqrt(remaining);
        calibration.w = Some(w);
        calibration.r = Some(r0 as u64);
        calibration.branch = Some(Branch::Regularized);
        gaussian_sketch(input, w, r0, rng)?
    } else {
        let r = rows_within_budget(s, b, budget)?;
        if r < d as u64 {
            return Err(Error::Calibration(alloc::format!(
                "unregularized branch chose r* = {r} < d = {d}"
            )));
        }
        let r = usize::try_from(r).map_err(|_| Error::Calibration(alloc::format!("r* = {r} overflows")))?;
        calibration.w = Some(0.0);
        calibration.r = Some(r as u64);
        calibration.branch = Some(Branch::Unregularized);
        gaussian_sketch(input, 0.0, r, rng)?
    };
    Ok(GramEstimate::new(matrix, MechanismId::RidgeJlAdaptive, calibration, rng.master_seed()))
}
