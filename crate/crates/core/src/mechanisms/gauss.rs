//! Additive Gaussian noise on `AᵀA` or its inverse, plus post-processing.

use super::calibration::{analyze_gauss_sigma, inverse_noise_sigma};
use super::{AgScaleMode, Calibration, GramEstimate, Input, MechanismConfig, MechanismId, AG_MONTE_CARLO_DRAWS};
use crate::dataset::PrivacyBudget;
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, min_singular_value, project_psd, spectral_norm};
use crate::rng::RngStream;
use crate::sampling::sample_symmetric_gaussian;

/// The exact `AᵀA`; not private.
pub fn exact(input: Input<'_>, seed: u64) -> GramEstimate {
    let calibration = Calibration {
        row_bound: Some(input.row_bound()),
        ..Default::default()
    };
    GramEstimate::new(input.moment().into_owned().gram().clone(), MechanismId::Exact, calibration, seed)
}

/// Analyze Gauss: `AᵀA + N` with symmetric i.i.d. Gaussian `N`.
pub fn analyze_gauss<'a>(
    input: impl Into<Input<'a>>,
    config: &MechanismConfig,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    let input = input.into();
    let b = input.row_bound();
    let convention = config.ag_variance_convention;
    let sigma = analyze_gauss_sigma(b, &config.budget, convention);
    let noise = sample_symmetric_gaussian(rng, input.dim(), sigma);
    let matrix = input.moment().gram().add(&noise)?;
    let calibration = Calibration {
        row_bound: Some(b),
        sigma: Some(sigma),
        convention: Some(convention),
        ..Default::default()
    };
    Ok(GramEstimate::new(matrix, MechanismId::AnalyzeGauss, calibration, rng.master_seed()))
}

/// Clamps the negative eigenvalues of an estimate to zero.
pub fn ag_psd_project(est: &GramEstimate) -> Result<GramEstimate> {
    let matrix = project_psd(&est.matrix)?;
    Ok(GramEstimate::new(matrix, MechanismId::AgPsd, est.calibration.clone(), est.seed))
}

/// Adds `cI`, `c ≈ E‖N‖`, to an Analyze Gauss release that is not positive definite.
///
/// `rng` is only consumed in [`AgScaleMode::MonteCarlo`].
pub fn ag_scaled(est: &GramEstimate, config: &MechanismConfig, rng: &mut RngStream) -> Result<GramEstimate> {
    let Some(sigma) = est.calibration.sigma else {
        return Err(invalid!("scaling needs an Analyze Gauss estimate with sigma recorded"));
    };
    let mut calibration = est.calibration.clone();
    if est.is_pd {
        calibration.shift = Some(0.0);
        return Ok(GramEstimate::new(est.matrix.clone(), MechanismId::AgScaled, calibration, est.seed));
    }
    let d = est.matrix.dim();
    let c = match config.ag_scale_constant_mode {
        AgScaleMode::Analytic => 2.0 * sigma * libm::sqrt(d as f64),
        AgScaleMode::MonteCarlo => {
            let mut total = 0.0;
            for _ in 0..AG_MONTE_CARLO_DRAWS {
                total += spectral_norm(&sample_symmetric_gaussian(rng, d, sigma))?;
            }
            total / AG_MONTE_CARLO_DRAWS as f64
        }
    };
    calibration.shift = Some(c);
    Ok(GramEstimate::new(est.matrix.shifted(c), MechanismId::AgScaled, calibration, est.seed))
}

/// Releases `(AᵀA)⁻¹ + N` under the public promise `σ_min(AᵀA) ≥ (1 + ρ)B²`.
pub fn gauss_inverse_noise<'a>(
    input: impl Into<Input<'a>>,
    budget: &PrivacyBudget,
    rho: f64,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    let input = input.into();
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid!("rho must be positive, got {rho}"));
    }
    let b = input.row_bound();
    let moment = input.moment();
    let ratio = min_singular_value(moment.gram(), true)? / (b * b);
    if ratio < 1.0 + rho {
        return Err(invalid!(
            "sigma_min(A^T A) / B^2 = {ratio} is below 1 + rho = {}",
            1.0 + rho
        ));
    }
    let inverse = cholesky(moment.gram(), 0.0)
        .map_err(|e| match e {
            Error::Singular { .. } => invalid!("A^T A is not invertible"),
            other => other,
        })?
        .inverse();
    let sigma = inverse_noise_sigma(rho, budget);
    let noise = sample_symmetric_gaussian(rng, input.dim(), sigma);
    let calibration = Calibration {
        row_bound: Some(b),
        sigma: Some(sigma),
        rho: Some(rho),
        inverse: true,
        ..Default::default()
    };
    Ok(GramEstimate::new(inverse.add(&noise)?, MechanismId::GaussInverse, calibration, rng.master_seed()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SecondMoment;
    use crate::linalg::SymMatrix;

    #[test]
    fn scaled_examples() {
        let budget = PrivacyBudget::new(1.0, 0.01).unwrap();
        let config = MechanismConfig::new(budget);
        let calibration = Calibration {
            sigma: Some(1.0),
            ..Default::default()
        };
        let est = GramEstimate::new(SymMatrix::scaled_identity(2, -1.0), MechanismId::AnalyzeGauss, calibration.clone(), 0);
        let out = ag_scaled(&est, &config, &mut RngStream::from_seed(0)).unwrap();
        let c = 2.0 * libm::sqrt(2.0);
        assert!((out.matrix.get(0, 0) - (c - 1.0)).abs() < 1e-12);
        assert_eq!(out.calibration.shift, Some(c));

        let pd = GramEstimate::new(SymMatrix::identity(2), MechanismId::AnalyzeGauss, calibration, 0);
        assert_eq!(ag_scaled(&pd, &config, &mut RngStream::from_seed(0)).unwrap().matrix, pd.matrix);
    }

    #[test]
    fn psd_projection_example() {
        let est = GramEstimate::new(SymMatrix::diagonal_from(&[3.0, -2.0]), MechanismId::AnalyzeGauss, Calibration::default(), 0);
        let out = ag_psd_project(&est).unwrap();
        assert!((out.matrix.get(0, 0) - 3.0).abs() < 1e-12);
        assert!(out.matrix.get(1, 1).abs() < 1e-12);
    }

    #[test]
    fn inverse_precondition() {
        let budget = PrivacyBudget::new(0.5, 1e-4).unwrap();
        let m = SecondMoment::new(SymMatrix::scaled_identity(2, 4.0), 10, 1.0).unwrap();
        assert!(gauss_inverse_noise(&m, &budget, 2.0, &mut RngStream::from_seed(1)).is_ok());
        assert!(matches!(
            gauss_inverse_noise(&m, &budget, 5.0, &mut RngStream::from_seed(1)),
            Err(Error::InvalidInput(_))
        ));
    }
}
