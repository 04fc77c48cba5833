//! Additive Wishart noise and its post-hoc bias correction.

use super::calibration::{wishart_dof, wishart_lower_shift};
use super::{Calibration, GramEstimate, Input, MechanismId};
use crate::dataset::PrivacyBudget;
use crate::error::{invalid, Result};
use crate::linalg::{default_pd_tolerance, is_positive_definite, SymMatrix};
use crate::rng::RngStream;
use crate::sampling::{sample_wishart, WishartSpec};

/// Releases `AᵀA + W` with `W ~ W_d(B²I, k)`, `k` from [`wishart_dof`].
pub fn additive_wishart<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    let input = input.into();
    let d = input.dim();
    let b = input.row_bound();
    let k = wishart_dof(d, budget)?;
    let spec = WishartSpec::new(SymMatrix::scaled_identity(d, b * b), k as f64)?;
    let noise = sample_wishart(rng, &spec)?;
    let matrix = input.moment().gram().add(&noise)?;
    let calibration = Calibration {
        row_bound: Some(b),
        k: Some(k),
        ..Default::default()
    };
    Ok(GramEstimate::new(matrix, MechanismId::AdditiveWishart, calibration, rng.master_seed()))
}

/// Subtracts the largest admissible multiple of `I` from an additive Wishart release.
///
/// Tries the noise mean `kB²` first, then the lower-tail shift
/// `B²(√k − (√d + √(2 ln(4/δ))))²`; a shift is kept only if the result stays
/// positive definite, otherwise the estimate is returned with shift 0.
pub fn wishart_bias_correct(est: &GramEstimate, budget: &PrivacyBudget) -> Result<GramEstimate> {
    let (Some(k), Some(b)) = (est.calibration.k, est.calibration.row_bound) else {
        return Err(invalid!("bias correction needs an additive Wishart estimate with k and B recorded"));
    };
    let d = est.matrix.dim();
    let tol = default_pd_tolerance(&est.matrix);
    let candidates = [Some(k as f64 * b * b), wishart_lower_shift(d, k, b, budget)];
    let (matrix, shift) = candidates
        .into_iter()
        .flatten()
        .map(|c| (est.matrix.shifted(-c), c))
        .find(|(m, _)| is_positive_definite(m, tol))
        .unwrap_or_else(|| (est.matrix.clone(), 0.0));
    let mut calibration = est.calibration.clone();
    calibration.shift = Some(shift);
    Ok(GramEstimate::new(matrix, MechanismId::WishartCorrected, calibration, est.seed))
}
