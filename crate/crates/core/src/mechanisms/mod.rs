//! Differentially private approximations of `AᵀA`.
//!
//! Every mechanism returns a [`GramEstimate`]: the released symmetric matrix
//! together with the calibration values it actually used. Mechanisms accept an
//! [`Input`], either the raw rows (the Gaussian projection is then applied to
//! the rows themselves) or a precomputed [`SecondMoment`] (the projection is
//! then drawn through a square root of `AᵀA`, which has the same output law).

use alloc::borrow::Cow;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dataset::{Dataset, PrivacyBudget, SecondMoment};
use crate::error::{invalid, Result};
use crate::linalg::{default_pd_tolerance, is_positive_definite, SymMatrix};
use crate::rng::RngStream;

mod calibration;
mod gauss;
mod inverse_wishart;
mod jl;
mod wishart;

pub use calibration::{
    adaptive_jl_width_squared, adaptive_psi, analyze_gauss_sigma, inverse_noise_sigma, inv_wishart_psi,
    jl_width, rows_within_budget, sv_estimate_from, wishart_dof, wishart_lower_shift,
};
pub use gauss::{ag_psd_project, ag_scaled, analyze_gauss, exact, gauss_inverse_noise};
pub use inverse_wishart::{inv_wishart, inv_wishart_adaptive, inv_wishart_adaptive_pinned};
pub use jl::{private_sv_estimate, ridge_jl, ridge_jl_adaptive, ridge_jl_adaptive_pinned};
pub use wishart::{additive_wishart, wishart_bias_correct};

/// Identifiers for every mechanism and post-processed variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MechanismId {
    /// Non-private baseline: the exact `AᵀA`.
    Exact,
    RidgeJl,
    RidgeJlAdaptive,
    AdditiveWishart,
    WishartCorrected,
    InvWishart,
    InvWishartAdaptive,
    AnalyzeGauss,
    AgPsd,
    AgScaled,
    GaussInverse,
}

impl MechanismId {
    pub const ALL: [MechanismId; 11] = [
        MechanismId::Exact,
        MechanismId::RidgeJl,
        MechanismId::RidgeJlAdaptive,
        MechanismId::AdditiveWishart,
        MechanismId::WishartCorrected,
        MechanismId::InvWishart,
        MechanismId::InvWishartAdaptive,
        MechanismId::AnalyzeGauss,
        MechanismId::AgPsd,
        MechanismId::AgScaled,
        MechanismId::GaussInverse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismId::Exact => "none",
            MechanismId::RidgeJl => "ridge-jl",
            MechanismId::RidgeJlAdaptive => "ridge-jl-adaptive",
            MechanismId::AdditiveWishart => "wishart",
            MechanismId::WishartCorrected => "wishart-corrected",
            MechanismId::InvWishart => "inv-wishart",
            MechanismId::InvWishartAdaptive => "inv-wishart-adaptive",
            MechanismId::AnalyzeGauss => "analyze-gauss",
            MechanismId::AgPsd => "ag-psd",
            MechanismId::AgScaled => "ag-scaled",
            MechanismId::GaussInverse => "gauss-inverse",
        }
    }

    /// Mechanisms whose output is positive definite with probability one.
    pub fn is_pd_by_construction(self) -> bool {
        matches!(
            self,
            MechanismId::RidgeJl
                | MechanismId::RidgeJlAdaptive
                | MechanismId::AdditiveWishart
                | MechanismId::InvWishart
                | MechanismId::InvWishartAdaptive
        )
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismId {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid!("unknown mechanism '{s}'"))
    }
}

/// Denominator of the Analyze Gauss noise variance `2B⁴ ln(2/δ) / ε^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AgConvention {
    /// `p = 2`, the usual Gaussian-mechanism calibration.
    #[default]
    EpsSquared,
    /// `p = 1`.
    EpsLinear,
}

impl AgConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            AgConvention::EpsSquared => "eps2",
            AgConvention::EpsLinear => "eps1",
        }
    }
}

impl FromStr for AgConvention {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps2" | "eps_squared" => Ok(AgConvention::EpsSquared),
            "eps1" | "eps_linear" => Ok(AgConvention::EpsLinear),
            _ => Err(invalid!("unknown Analyze Gauss convention '{s}'")),
        }
    }
}

/// How the scaled Analyze Gauss variant estimates `E‖N‖`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AgScaleMode {
    /// `2σ√d`, the spectral edge of a symmetric Gaussian ensemble.
    #[default]
    Analytic,
    /// Average spectral norm over fresh symmetric noise draws.
    MonteCarlo,
}

/// Number of fresh draws averaged by [`AgScaleMode::MonteCarlo`].
pub const AG_MONTE_CARLO_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    pub budget: PrivacyBudget,
    /// Rows of the projection for `ridge-jl`; `2d` when absent.
    pub r: Option<usize>,
    /// Minimal rows (`ridge-jl-adaptive`) or degrees of freedom (`inv-wishart-adaptive`); `2d` when absent.
    pub r0_or_k0: Option<usize>,
    /// Public spectral margin for `gauss-inverse`.
    pub rho: Option<f64>,
    pub ag_variance_convention: AgConvention,
    pub ag_scale_constant_mode: AgScaleMode,
}

impl MechanismConfig {
    pub fn new(budget: PrivacyBudget) -> Self {
        Self {
            budget,
            r: None,
            r0_or_k0: None,
            rho: None,
            ag_variance_convention: AgConvention::default(),
            ag_scale_constant_mode: AgScaleMode::default(),
        }
    }
}

/// Which side of the data-dependent split an adaptive mechanism took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// A positive ridge `w` (or prior scale `ψ`) remained after the adjustment.
    Regularized,
    /// The ridge vanished; the row count / degrees of freedom were derived from `s`.
    Unregularized,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Regularized => "regularized",
            Branch::Unregularized => "unregularized",
        }
    }
}

/// Parameters a mechanism actually used. Only the fields it defines are set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Calibration {
    pub row_bound: Option<f64>,
    pub w: Option<f64>,
    pub r: Option<u64>,
    pub k: Option<u64>,
    pub psi: Option<f64>,
    pub dof: Option<u64>,
    /// Private lower estimate of `σ_min(AᵀA)`.
    pub s: Option<f64>,
    pub shift: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub convention: Option<AgConvention>,
    pub branch: Option<Branch>,
    /// The matrix estimates `(AᵀA)⁻¹` rather than `AᵀA`.
    pub inverse: bool,
}

impl Calibration {
    /// `key=value` pairs for the fields that are set, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut float = |key, v: Option<f64>| {
            if let Some(v) = v {
                out.push((key, format!("{v:?}")));
            }
        };
        float("row_bound", self.row_bound);
        float("w", self.w);
        float("psi", self.psi);
        float("s", self.s);
        float("shift", self.shift);
        float("sigma", self.sigma);
        float("rho", self.rho);
        for (key, v) in [("r", self.r), ("k", self.k), ("dof", self.dof)] {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        if let Some(c) = self.convention {
            out.push(("convention", c.as_str().to_string()));
        }
        if let Some(b) = self.branch {
            out.push(("branch", b.as_str().to_string()));
        }
        if self.inverse {
            out.push(("inverse", "true".to_string()));
        }
        out
    }

    /// Inverse of [`Calibration::entries`] for a single pair; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || value.parse::<f64>().map_err(|_| invalid!("bad value for {key}: '{value}'"));
        let int = || value.parse::<u64>().map_err(|_| invalid!("bad value for {key}: '{value}'"));
        match key {
            "row_bound" => self.row_bound = Some(float()?),
            "w" => self.w = Some(float()?),
            "psi" => self.psi = Some(float()?),
            "s" => self.s = Some(float()?),
            "shift" => self.shift = Some(float()?),
            "sigma" => self.sigma = Some(float()?),
            "rho" => self.rho = Some(float()?),
            "r" => self.r = Some(int()?),
            "k" => self.k = Some(int()?),
            "dof" => self.dof = Some(int()?),
            "convention" => self.convention = Some(value.parse()?),
            "branch" => {
                self.branch = Some(match value {
                    "regularized" => Branch::Regularized,
                    "unregularized" => Branch::Unregularized,
                    _ => return Err(invalid!("unknown branch '{value}'")),
                })
            }
            "inverse" => self.inverse = value == "true",
            _ => return Err(invalid!("unknown calibration key '{key}'")),
        }
        Ok(())
    }
}

/// A released `d × d` symmetric matrix and how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct GramEstimate {
    pub matrix: SymMatrix,
    pub mechanism: MechanismId,
    pub calibration: Calibration,
    pub seed: u64,
    pub is_pd: bool,
}

impl GramEstimate {
    pub fn new(matrix: SymMatrix, mechanism: MechanismId, calibration: Calibration, seed: u64) -> Self {
        let is_pd = is_positive_definite(&matrix, default_pd_tolerance(&matrix));
        Self {
            matrix,
            mechanism,
            calibration,
            seed,
            is_pd,
        }
    }
}

/// Mechanism input: raw rows or precomputed sufficient statistics.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Rows(&'a Dataset),
    Moment(&'a SecondMoment),
}

impl<'a> From<&'a Dataset> for Input<'a> {
    fn from(a: &'a Dataset) -> Self {
        Input::Rows(a)
    }
}

impl<'a> From<&'a SecondMoment> for Input<'a> {
    fn from(m: &'a SecondMoment) -> Self {
        Input::Moment(m)
    }
}

impl<'a> Input<'a> {
    pub fn moment(&self) -> Cow<'a, SecondMoment> {
        match *self {
            Input::Rows(a) => Cow::Owned(SecondMoment::from_dataset(a)),
            Input::Moment(m) => Cow::Borrowed(m),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Input::Rows(a) => a.cols(),
            Input::Moment(m) => m.dim(),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Input::Rows(a) => a.rows(),
            Input::Moment(m) => m.rows(),
        }
    }

    pub fn row_bound(&self) -> f64 {
        match self {
            Input::Rows(a) => a.row_bound(),
            Input::Moment(m) => m.row_bound(),
        }
    }
}

/// Test-only override for the private least-singular-value step of the adaptive mechanisms.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvPin {
    /// Replace the Laplace draw `Z` by this value.
    Laplace(f64),
    /// Replace the whole estimate `s` by this value.
    Estimate(f64),
}

/// Runs `id` with the parameters in `config`.
pub fn run<'a>(
    id: MechanismId,
    input: impl Into<Input<'a>>,
    config: &MechanismConfig,
    rng: &mut RngStream,
) -> Result<GramEstimate> {
    let input = input.into();
    let budget = &config.budget;
    let twice_dim = 2 * input.dim();
    match id {
        MechanismId::Exact => Ok(exact(input, rng.master_seed())),
        MechanismId::RidgeJl => ridge_jl(input, budget, config.r.unwrap_or(twice_dim), rng),
        MechanismId::RidgeJlAdaptive => {
            ridge_jl_adaptive(input, budget, config.r0_or_k0.unwrap_or(twice_dim), rng)
        }
        MechanismId::AdditiveWishart => additive_wishart(input, budget, rng),
        MechanismId::WishartCorrected => {
            let raw = additive_wishart(input, budget, rng)?;
            wishart_bias_correct(&raw, budget)
        }
        MechanismId::InvWishart => inv_wishart(input, budget, rng),
        MechanismId::InvWishartAdaptive => {
            inv_wishart_adaptive(input, budget, config.r0_or_k0.unwrap_or(twice_dim), rng)
        }
        MechanismId::AnalyzeGauss => analyze_gauss(input, config, rng),
        MechanismId::AgPsd => ag_psd_project(&analyze_gauss(input, config, rng)?),
        MechanismId::AgScaled => {
            let raw = analyze_gauss(input, config, rng)?;
            ag_scaled(&raw, config, rng)
        }
        MechanismId::GaussInverse => {
            let rho = config
                .rho
                .ok_or_else(|| invalid!("gauss-inverse needs the public margin rho"))?;
            gauss_inverse_noise(input, budget, rho, rng)
        }
    }
}
