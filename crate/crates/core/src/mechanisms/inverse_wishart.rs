//! Inverse-Wishart releases of `AᵀA`.

use super::calibration::{adaptive_psi, inv_wishart_psi, rows_within_budget};
use super::jl::sv_estimate_for;
use super::{Branch, Calibration, GramEstimate, Input, MechanismId, SvPin};
use crate::dataset::PrivacyBudget;
use crate::error::{invalid, Error, Result};
use crate::linalg::{default_pd_tolerance, is_positive_definite};
use crate::rng::RngStream;
use crate::sampling::sample_inverse_wishart;

/// Samples `W⁻¹_d(AᵀA + ψI, n + d)`.
pub fn inv_wishart<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    let input = input.into();
    let b = input.row_bound();
    let dof = input.rows() + input.dim();
    let psi = inv_wishart_psi(b, dof, budget);
    let scale = input.moment().gram().shifted(psi);
    let matrix = sample_inverse_wishart(rng, &scale, dof as f64)?;
    let calibration = Calibration {
        row_bound: Some(b),
        psi: Some(psi),
        dof: Some(dof as u64),
        ..Default::default()
    };
    Ok(GramEstimate::new(matrix, MechanismId::InvWishart, calibration, rng.master_seed()))
}

/// Inverse-Wishart release whose degrees of freedom adapt to the data.
///
/// The prior scale `ψ` for `k₀` degrees of freedom is reduced by the private
/// estimate `s` of `σ_min(AᵀA)`. If some remains, `W⁻¹(AᵀA + ψI, k₀)` is
/// sampled; otherwise `W⁻¹(AᵀA, k*)` with the largest `k*` the estimate allows.
pub fn inv_wishart_adaptive<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    k0: usize,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    inv_wishart_adaptive_pinned(input, budget, k0, rng, None)
}

#[doc(hidden)]
pub fn inv_wishart_adaptive_pinned<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    k0: usize,
    rng: &mut RngStream,
    pin: Option<SvPin>,
) -> Result<GramEstimate> {
    let input = input.into();
    let d = input.dim();
    if k0 < d {
        return Err(invalid!("inv-wishart-adaptive needs k0 > d - 1: k0 = {k0}, d = {d}"));
    }
    let b = input.row_bound();
    let psi0 = adaptive_psi(b, k0, budget);
    let s = sv_estimate_for(input, budget, rng, pin)?;
    let psi = (psi0 - s).max(0.0);
    let moment = input.moment();
    let mut calibration = Calibration {
        row_bound: Some(b),
        s: Some(s),
        ..Default::default()
    };
    let matrix = if psi > 0.0 {
        calibration.psi = Some(psi);
        calibration.dof = Some(k0 as u64);
        calibration.branch = Some(Branch::Regularized);
        sample_inverse_wishart(rng, &moment.gram().shifted(psi), k0 as f64)?
    } else {
        let k = rows_within_budget(s, b, budget)?;
        if k < d as u64 {
            return Err(Error::Calibration(alloc::format!(
                "unregularized branch chose k* = {k} <= d - 1 = {}",
                d - 1
            )));
        }
        let gram = moment.gram();
        if !is_positive_definite(gram, default_pd_tolerance(gram)) {
            return Err(Error::Calibration(alloc::string::String::from(
                "unregularized branch reached with a singular Gram matrix",
            )));
        }
        calibration.psi = Some(0.0);
        calibration.dof = Some(k);
        calibration.branch = Some(Branch::Unregularized);
        sample_inverse_wishart(rng, gram, k as f64)?
    };
    Ok(GramEstimate::new(matrix, MechanismId::InvWishartAdaptive, calibration, rng.master_seed()))
}
