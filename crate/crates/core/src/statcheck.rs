//! Monte Carlo and exact-identity checks of the concentration facts the
//! mechanisms rely on.
//!
//! Every check draws trial `t` from `rng.child(t)`, so reports are
//! reproducible and independent of evaluation order. A report passes when
//! `violations / trials ≤ bound + 3√(bound(1 − bound)/trials)`.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};

use crate::error::{invalid, Result};
use crate::linalg::{cholesky, gram_of, min_singular_value, symmetric_eigen, Matrix, SymMatrix};
use crate::rng::RngStream;
use crate::sampling::{fill_standard_normal, sample_gaussian_matrix, sample_wishart, standard_normal, WishartSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check_id: &'static str,
    pub trials: usize,
    pub violations: usize,
    /// Theoretical failure probability.
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
    /// Named summary statistics.
    pub details: Vec<(String, f64)>,
}

/// Three-sigma binomial margin `3√(b(1 − b)/trials)`.
pub fn binomial_slack(bound: f64, trials: usize) -> f64 {
    3.0 * sqrt(bound * (1.0 - bound) / trials as f64)
}

impl CheckReport {
    pub fn new(check_id: &'static str, trials: usize, violations: usize, bound: f64) -> Self {
        let slack = binomial_slack(bound, trials);
        let passed = trials > 0 && violations as f64 / trials as f64 <= bound + slack;
        Self {
            check_id,
            trials,
            violations,
            bound,
            slack,
            passed,
            details: Vec::new(),
        }
    }

    pub fn rate(&self) -> f64 {
        self.violations as f64 / self.trials as f64
    }

    fn with(mut self, name: &str, value: f64) -> Self {
        self.details.push((String::from(name), value));
        self
    }

    pub fn detail(&self, name: &str) -> Option<f64> {
        self.details.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(invalid!("a check needs at least one trial"));
    }
    Ok(())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn unit_vector(rng: &mut RngStream, dim: usize) -> Vec<f64> {
    let mut v = alloc::vec![0.0; dim];
    loop {
        fill_standard_normal(rng, &mut v);
        let len = sqrt(v.iter().map(|x| x * x).sum());
        if len > 1e-12 {
            v.iter_mut().for_each(|x| *x /= len);
            return v;
        }
    }
}

/// Relative tolerance of the exact-identity checks.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// Matrix determinant lemma and Sherman–Morrison update on random
/// well-conditioned `A = I + G/(2√d)` and small `u, v`.
///
/// Pairs with `|1 + vᵀA⁻¹u| < 0.1` are redrawn: near there both sides lose
/// all relative accuracy and the comparison measures rounding, not the identity.
pub fn check_sherman_morrison(rng: &RngStream, dim: usize, trials: usize) -> Result<CheckReport> {
    if dim < 2 {
        return Err(invalid!("Sherman-Morrison check needs dim >= 2"));
    }
    check_trials(trials)?;
    let mut violations = 0;
    let mut worst = 0.0f64;
    let scale = 0.5 / sqrt(dim as f64);
    for t in 0..trials {
        let mut rng = rng.child(t as u64);
        let a = Matrix::identity(dim, dim) + sample_gaussian_matrix(&mut rng, dim, dim, scale);
        let Some(a_inv) = a.clone().try_inverse() else {
            violations += 1;
            continue;
        };
        let (u, v, gamma) = loop {
            let u = sample_gaussian_matrix(&mut rng, dim, 1, 2.0 * scale);
            let v = sample_gaussian_matrix(&mut rng, dim, 1, 2.0 * scale);
            let gamma = 1.0 + (v.transpose() * &a_inv * &u)[(0, 0)];
            if gamma.abs() >= 0.1 {
                break (u, v, gamma);
            }
        };
        let updated = &a + &u * v.transpose();
        let det_gap = relative_gap(updated.clone().lu().determinant(), a.clone().lu().determinant() * gamma);
        let inverse_gap = match updated.try_inverse() {
            Some(direct) => {
                let formula = &a_inv - (&a_inv * &u) * (v.transpose() * &a_inv) / gamma;
                (&direct - &formula).norm() / direct.norm()
            }
            None => f64::INFINITY,
        };
        let gap = det_gap.max(inverse_gap);
        worst = worst.max(gap);
        if !(gap <= IDENTITY_TOLERANCE) {
            violations += 1;
        }
    }
    Ok(CheckReport::new("sherman_morrison", trials, violations, 0.0).with("max_relative_error", worst))
}

/// Two-sided χ²_k tail: `Pr[χ² > (√k + √Δ)²]` and `Pr[χ² < (√k − √Δ)²]`, each below `e^{−Δ/2}`.
///
/// `violations` is the larger of the two tail counts.
pub fn check_chi2_tail(rng: &RngStream, k: usize, delta_param: f64, trials: usize) -> Result<CheckReport> {
    if !(delta_param > 0.0 && delta_param < k as f64) {
        return Err(invalid!("chi-squared check needs 0 < Delta < k, got Delta = {delta_param}, k = {k}"));
    }
    check_trials(trials)?;
    let (sk, sd) = (sqrt(k as f64), sqrt(delta_param));
    let (upper, lower) = ((sk + sd) * (sk + sd), (sk - sd) * (sk - sd));
    let (mut above, mut below) = (0, 0);
    let mut z = alloc::vec![0.0; k];
    for t in 0..trials {
        let mut rng = rng.child(t as u64);
        fill_standard_normal(&mut rng, &mut z);
        let x: f64 = z.iter().map(|v| v * v).sum();
        if x > upper {
            above += 1;
        }
        if x < lower {
            below += 1;
        }
    }
    let bound = exp(-delta_param / 2.0);
    Ok(CheckReport::new("chi2_tail", trials, above.max(below), bound)
        .with("upper_rate", above as f64 / trials as f64)
        .with("lower_rate", below as f64 / trials as f64))
}

/// `|vᵀ(I − M⁻¹)v|` with `M = XᵀX/(r − d + 1)`; infinite if `M` is singular.
fn inverse_deviation(x: &Matrix, v: &[f64]) -> f64 {
    let (r, d) = (x.nrows(), x.ncols());
    let m = gram_of(x).scaled(1.0 / (r - d + 1) as f64);
    match cholesky(&m, 0.0) {
        Ok(f) => {
            let z = f.solve(v);
            let q: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
            let len2: f64 = v.iter().map(|a| a * a).sum();
            (len2 - q).abs()
        }
        Err(_) => f64::INFINITY,
    }
}

fn forward_deviation(x: &Matrix, v: &[f64]) -> f64 {
    let r = x.nrows();
    let xv = x * Matrix::from_column_slice(v.len(), 1, v);
    let len2: f64 = v.iter().map(|a| a * a).sum();
    (xv.norm_squared() / r as f64 - len2).abs()
}

/// Gaussian JL concentration for a fixed unit vector, forward and inverse forms.
///
/// Forward: `|vᵀ(XᵀX/r − I)v| ≤ 2√(2 ln(2/β)/r) + 2 ln(2/β)/r`.
/// Inverse: `|vᵀ(I − (XᵀX/(r−d+1))⁻¹)v| ≤ (2t − t²)/(1 − t)²`, `t = √(2 ln(2/β)/(r−d+1))`.
/// `violations` is the larger of the two counts.
pub fn check_jl_lemma(rng: &RngStream, r: usize, d: usize, beta_param: f64, trials: usize) -> Result<CheckReport> {
    if d == 0 || r < d {
        return Err(invalid!("JL check needs r >= d >= 1, got r = {r}, d = {d}"));
    }
    if !(beta_param > 0.0 && beta_param < 1.0) {
        return Err(invalid!("beta must lie in (0, 1), got {beta_param}"));
    }
    check_trials(trials)?;
    let l = log(2.0 / beta_param);
    let forward_bound = 2.0 * sqrt(2.0 * l / r as f64) + 2.0 * l / r as f64;
    let t = sqrt(2.0 * l / (r - d + 1) as f64);
    if t >= 1.0 {
        return Err(invalid!("inverse JL bound needs t < 1, got t = {t}"));
    }
    let inverse_bound = (2.0 * t - t * t) / ((1.0 - t) * (1.0 - t));
    let (mut fwd, mut inv) = (0, 0);
    for trial in 0..trials {
        let mut rng = rng.child(trial as u64);
        let x = sample_gaussian_matrix(&mut rng, r, d, 1.0);
        let v = unit_vector(&mut rng, d);
        if forward_deviation(&x, &v) > forward_bound {
            fwd += 1;
        }
        if !(inverse_deviation(&x, &v) <= inverse_bound) {
            inv += 1;
        }
    }
    Ok(CheckReport::new("jl_lemma", trials, fwd.max(inv), beta_param)
        .with("forward_rate", fwd as f64 / trials as f64)
        .with("inverse_rate", inv as f64 / trials as f64)
        .with("forward_bound", forward_bound)
        .with("inverse_bound", inverse_bound))
}

/// `Qᵀ D Q` with `Q` orthogonal (QR of a Gaussian matrix) and `D` log-uniform on `[0.1, 10]`.
pub fn random_pd_matrix(rng: &mut RngStream, dim: usize) -> SymMatrix {
    let g = sample_gaussian_matrix(rng, dim, dim, 1.0);
    let q = g.qr().q();
    let diag: Vec<f64> = (0..dim)
        .map(|_| {
            let u: f64 = rand::Rng::random(rng);
            exp(log(0.1) + u * (log(10.0) - log(0.1)))
        })
        .collect();
    SymMatrix::from_fn(dim, |i, j| (0..dim).map(|k| q[(k, i)] * diag[k] * q[(k, j)]).sum())
}

/// Eigenvalue sandwich for `X ~ W_d(V, m)`:
/// `(√m − g)² σ_j(V) ≤ σ_j(X) ≤ (√m + g)² σ_j(V)` for all `j`, `g = √d + √(2 ln(2/δ))`.
///
/// `scale = None` draws one fixed random `V` with [`random_pd_matrix`].
pub fn check_wishart_eigen_bounds(
    rng: &RngStream,
    d: usize,
    m: usize,
    delta_param: f64,
    trials: usize,
    scale: Option<SymMatrix>,
) -> Result<CheckReport> {
    if d == 0 {
        return Err(invalid!("dimension must be positive"));
    }
    if !(delta_param > 0.0 && delta_param < 1.0) {
        return Err(invalid!("delta must lie in (0, 1), got {delta_param}"));
    }
    check_trials(trials)?;
    let g = sqrt(d as f64) + sqrt(2.0 * log(2.0 / delta_param));
    let sm = sqrt(m as f64);
    if sm <= g {
        return Err(invalid!("eigenvalue bounds need sqrt(m) > sqrt(d) + sqrt(2 ln(2/delta))"));
    }
    let v = match scale {
        Some(v) if v.dim() == d => v,
        Some(v) => return Err(invalid!("scale has dimension {}, expected {d}", v.dim())),
        None => random_pd_matrix(&mut rng.child(u64::MAX), d),
    };
    let v_eigs = symmetric_eigen(&v)?.values;
    let spec = WishartSpec::new(v, m as f64)?;
    let (lo, hi) = ((sm - g) * (sm - g), (sm + g) * (sm + g));
    let mut violations = 0;
    for t in 0..trials {
        let mut rng = rng.child(t as u64);
        let x = sample_wishart(&mut rng, &spec)?;
        let eigs = symmetric_eigen(&x)?.values;
        if eigs
            .iter()
            .zip(&v_eigs)
            .any(|(&e, &s)| e < lo * s || e > hi * s)
        {
            violations += 1;
        }
    }
    Ok(CheckReport::new("wishart_eigen_bounds", trials, violations, delta_param)
        .with("lower_factor", lo)
        .with("upper_factor", hi))
}

/// Right-hand side of the additive-Wishart utility bound.
pub fn wishart_utility_rhs(beta_norm: f64, c: f64, sigma: f64, sigma_min: f64, p: usize, k: usize, nu: f64) -> f64 {
    let (kf, pf) = (k as f64, p as f64);
    let edge = sqrt(kf) + sqrt(pf) + sqrt(2.0 * log(4.0 / nu));
    let spread = (2.0 * sqrt(2.0 * kf * pf * log(4.0 * pf / nu))).min(edge * edge);
    beta_norm / (c - 1.0) + sigma * sigma * (c - 2.0) / ((c - 1.0) * sigma_min) * spread
}

/// Utility of regression on `[X; y]ᵀ[X; y] + W`, `W ~ W_{p+1}(σ²I, k)`:
/// `‖β̃ − β̂‖` against [`wishart_utility_rhs`].
///
/// One design `X` (`4(p + k)` Gaussian rows) and response `y = X·1 + e` are
/// drawn once, then `X` is rescaled so `σ_min(XᵀX) = C σ²(√k + √p + √(2 ln(4/ν)))²`.
/// With `σ = 0` the design is left unscaled and `W = 0`.
pub fn check_wishart_utility_bound(
    rng: &RngStream,
    p: usize,
    k: usize,
    sigma: f64,
    nu_param: f64,
    c_ratio: f64,
    trials: usize,
) -> Result<CheckReport> {
    if p == 0 || k == 0 {
        return Err(invalid!("need p >= 1 and k >= 1"));
    }
    if !(c_ratio >= 2.0) {
        return Err(invalid!("the utility bound needs C >= 2, got {c_ratio}"));
    }
    if !(nu_param > 0.0 && nu_param < 1.0) {
        return Err(invalid!("nu must lie in (0, 1), got {nu_param}"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid!("sigma must be non-negative, got {sigma}"));
    }
    check_trials(trials)?;
    let n = 4 * (p + k);
    let mut setup = rng.child(u64::MAX);
    let mut x = sample_gaussian_matrix(&mut setup, n, p, 1.0);
    let mut y: Vec<f64> = (0..n)
        .map(|i| x.row(i).sum() + standard_normal(&mut setup))
        .collect();
    let edge = sqrt(k as f64) + sqrt(p as f64) + sqrt(2.0 * log(4.0 / nu_param));
    let target = c_ratio * sigma * sigma * edge * edge;
    if sigma > 0.0 {
        let factor = sqrt(target / min_singular_value(&gram_of(&x), true)?);
        x *= factor;
        y.iter_mut().for_each(|v| *v *= factor);
    }
    let mut data = Matrix::zeros(n, p + 1);
    data.view_mut((0, 0), (n, p)).copy_from(&x);
    for (i, v) in y.iter().enumerate() {
        data[(i, p)] = *v;
    }
    let moment = gram_of(&data);
    let features: Vec<usize> = (0..p).collect();
    let task = crate::regress::RegressionTask::new(p, features, p + 1)?;
    let beta_hat = crate::regress::solve_from_gram(&moment, &task)?;
    let sigma_min = min_singular_value(&moment.principal(task.features()), true)?;
    let rhs = wishart_utility_rhs(beta_hat.norm(), c_ratio, sigma, sigma_min, p, k, nu_param);
    let spec = (sigma > 0.0)
        .then(|| WishartSpec::new(SymMatrix::scaled_identity(p + 1, sigma * sigma), k as f64))
        .transpose()?;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut rng = rng.child(t as u64);
        let noisy = match &spec {
            Some(spec) => moment.add(&sample_wishart(&mut rng, spec)?)?,
            None => moment.clone(),
        };
        let lhs = match crate::regress::solve_from_gram(&noisy, &task) {
            Ok(beta) => crate::regress::l2_error(&beta, &beta_hat)?,
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(lhs / rhs);
        if !(lhs <= rhs) {
            violations += 1;
        }
    }
    Ok(CheckReport::new("wishart_utility_bound", trials, violations, nu_param)
        .with("rhs", rhs)
        .with("max_lhs_over_rhs", worst)
        .with("sigma_min", sigma_min))
}

/// Scale of the inverse JL deviation with `r = d + ⌈8/η²⌉` rows.
///
/// Records `C_emp = p95 / η`. A trial violates when its deviation exceeds
/// `4η`; with bound 0.05 the report passes roughly when `C_emp ≤ 4`.
pub fn check_inverse_jl_vs_forward(rng: &RngStream, d: usize, eta: f64, trials: usize) -> Result<CheckReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid!("eta must lie in (0, 1), got {eta}"));
    }
    if d == 0 {
        return Err(invalid!("dimension must be positive"));
    }
    check_trials(trials)?;
    let r = d + libm::ceil(8.0 / (eta * eta)) as usize;
    let mut devs = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = rng.child(t as u64);
        let x = sample_gaussian_matrix(&mut rng, r, d, 1.0);
        let v = unit_vector(&mut rng, d);
        devs.push(inverse_deviation(&x, &v));
    }
    let violations = devs.iter().filter(|&&v| !(v <= 4.0 * eta)).count();
    devs.sort_by(f64::total_cmp);
    let p95 = devs[(libm::ceil(0.95 * trials as f64) as usize).clamp(1, trials) - 1];
    Ok(CheckReport::new("inverse_jl_vs_forward", trials, violations, 0.05)
        .with("rows", r as f64)
        .with("p95", p95)
        .with("c_emp", p95 / eta))
}

/// Identifiers of the checks in [`run_suite`].
pub const CHECK_IDS: [&str; 6] = [
    "sherman_morrison",
    "chi2_tail",
    "jl_lemma",
    "wishart_eigen_bounds",
    "wishart_utility_bound",
    "inverse_jl_vs_forward",
];

/// Runs one named check at its reference parameters.
pub fn run_check(id: &str, seed: u64) -> Result<CheckReport> {
    let rng = RngStream::new(seed, crate::rng::stream_id_of(&[0xC4EC, CHECK_IDS.iter().position(|c| *c == id).unwrap_or(99) as u64]));
    match id {
        "sherman_morrison" => check_sherman_morrison(&rng, 8, 1_000),
        "chi2_tail" => check_chi2_tail(&rng, 50, 2.0 * log(40.0), 100_000),
        "jl_lemma" => check_jl_lemma(&rng, 200, 10, 0.05, 10_000),
        "wishart_eigen_bounds" => check_wishart_eigen_bounds(&rng, 3, 400, 0.05, 2_000, None),
        "wishart_utility_bound" => check_wishart_utility_bound(&rng, 5, 60, 1.0, 0.1, 4.0, 2_000),
        "inverse_jl_vs_forward" => check_inverse_jl_vs_forward(&rng, 10, 0.2, 5_000),
        _ => Err(invalid!("unknown check '{id}'")),
    }
}

/// Every check at its reference parameters, in [`CHECK_IDS`] order.
pub fn run_suite(seed: u64) -> Result<Vec<CheckReport>> {
    CHECK_IDS.iter().map(|id| run_check(id, seed)).collect()
}
