//! Closed-form noise calibrations. All functions are pure.

use libm::{floor, sqrt};

use super::AgConvention;
use crate::dataset::PrivacyBudget;
use crate::error::{invalid, Error, Result};

/// Ridge width `w` of the fixed-row projection mechanism with `r` rows.
pub fn jl_width(row_bound: f64, r: usize, budget: &PrivacyBudget) -> f64 {
    let l = budget.log_ratio(4.0);
    let b2 = row_bound * row_bound;
    sqrt(4.0 * b2 * (sqrt(2.0 * r as f64 * l) + l) / budget.epsilon())
}

/// `(8B²/ε)(√(2r ln(8/δ)) + ln(8/δ))`: the squared ridge of the adaptive
/// projection mechanism before it is reduced by the private `σ_min` estimate.
pub fn adaptive_jl_width_squared(row_bound: f64, r0: usize, budget: &PrivacyBudget) -> f64 {
    let l = budget.log_ratio(8.0);
    8.0 * row_bound * row_bound / budget.epsilon() * (sqrt(2.0 * r0 as f64 * l) + l)
}

/// Prior scale `ψ` of the adaptive inverse-Wishart mechanism before adjustment.
///
/// `(4B²/ε)(2√(2k ln(8/δ)) + 2 ln(8/δ))`, numerically the same budget curve as
/// [`adaptive_jl_width_squared`].
pub fn adaptive_psi(row_bound: f64, k0: usize, budget: &PrivacyBudget) -> f64 {
    let l = budget.log_ratio(8.0);
    4.0 * row_bound * row_bound / budget.epsilon() * (2.0 * sqrt(2.0 * k0 as f64 * l) + 2.0 * l)
}

/// Prior scale `ψ` of the fixed inverse-Wishart mechanism with `ν` degrees of freedom.
pub fn inv_wishart_psi(row_bound: f64, nu: usize, budget: &PrivacyBudget) -> f64 {
    let l = budget.log_ratio(4.0);
    2.0 * row_bound * row_bound / budget.epsilon() * (2.0 * sqrt(2.0 * nu as f64 * l) + 2.0 * l)
}

/// Degrees of freedom `⌊d + (14/ε²)·2 ln(4/δ)⌋` of the additive Wishart mechanism.
///
/// Only calibrated for `ε ≤ 1`.
pub fn wishart_dof(dim: usize, budget: &PrivacyBudget) -> Result<u64> {
    let eps = budget.epsilon();
    if eps > 1.0 {
        return Err(invalid!("additive Wishart requires epsilon <= 1, got {eps}"));
    }
    Ok(floor(dim as f64 + 14.0 / (eps * eps) * 2.0 * budget.log_ratio(4.0)) as u64)
}

/// Lower-tail shift `B²(√k − (√d + √(2 ln(4/δ))))²`, or `None` when
/// `√k` does not exceed `√d + √(2 ln(4/δ))`.
pub fn wishart_lower_shift(dim: usize, k: u64, row_bound: f64, budget: &PrivacyBudget) -> Option<f64> {
    let gap = sqrt(k as f64) - (sqrt(dim as f64) + sqrt(2.0 * budget.log_ratio(4.0)));
    (gap > 0.0).then_some(row_bound * row_bound * gap * gap)
}

/// `max{0, σ_min − 2B² ln(2/δ)/ε + z}` for a Laplace draw `z` of scale `2B²/ε`.
pub fn sv_estimate_from(sigma_min: f64, row_bound: f64, budget: &PrivacyBudget, z: f64) -> f64 {
    let shift = 2.0 * row_bound * row_bound * budget.log_ratio(2.0) / budget.epsilon();
    let s = sigma_min - shift + z;
    if s > 0.0 {
        s
    } else {
        0.0
    }
}

/// Largest row count `r` with `(8B²/ε)(√(2r ln(8/δ)) + ln(8/δ)) ≤ s`.
///
/// This is `⌊T²/(2L)⌋` with `L = ln(8/δ)` and `T = sε/(8B²) − L`, checked
/// against the defining inequality to absorb rounding.
pub fn rows_within_budget(s: f64, row_bound: f64, budget: &PrivacyBudget) -> Result<u64> {
    if !s.is_finite() {
        return Err(Error::Calibration(alloc::format!("spectral estimate {s} is not finite")));
    }
    let l = budget.log_ratio(8.0);
    let b2 = row_bound * row_bound;
    let t = s * budget.epsilon() / (8.0 * b2) - l;
    if t <= 0.0 {
        return Err(Error::Internal(alloc::format!(
            "row count requested with s = {s} below the ln(8/delta) floor"
        )));
    }
    let cost = |r: u64| 8.0 * b2 / budget.epsilon() * (sqrt(2.0 * r as f64 * l) + l);
    let r = floor(t * t / (2.0 * l));
    if r >= u64::MAX as f64 / 2.0 {
        return Err(Error::Calibration(alloc::format!("row count for s = {s} overflows")));
    }
    let mut r = r as u64;
    while cost(r + 1) <= s {
        r += 1;
    }
    while r > 0 && cost(r) > s {
        r -= 1;
    }
    Ok(r)
}

/// Entry standard deviation of the Analyze Gauss noise.
pub fn analyze_gauss_sigma(row_bound: f64, budget: &PrivacyBudget, convention: AgConvention) -> f64 {
    let b2 = row_bound * row_bound;
    let l = budget.log_ratio(2.0);
    match convention {
        AgConvention::EpsSquared => b2 * sqrt(2.0 * l) / budget.epsilon(),
        AgConvention::EpsLinear => b2 * sqrt(2.0 * l / budget.epsilon()),
    }
}

/// Entry standard deviation `√(8 ln(2/δ)) / (ρε)` of the noise added to `(AᵀA)⁻¹`.
pub fn inverse_noise_sigma(rho: f64, budget: &PrivacyBudget) -> f64 {
    sqrt(8.0 * budget.log_ratio(2.0)) / (rho * budget.epsilon())
}
