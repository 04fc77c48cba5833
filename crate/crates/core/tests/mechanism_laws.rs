mod common;

use common::{gaussian_dataset, rel_frobenius, MeanAcc};
use gramdp::linalg::{cholesky, SymMatrix};
use gramdp::mechanisms::*;
use gramdp::{gram, Error, PrivacyBudget, RngStream, SecondMoment};

fn budget(eps: f64, delta: f64) -> PrivacyBudget {
    PrivacyBudget::new(eps, delta).unwrap()
}

#[test]
fn releases_are_positive_definite() {
    let a = gaussian_dataset(1, 40, 5, 2.0);
    let m = SecondMoment::from_dataset(&a);
    let bud = budget(0.5, 1e-5);
    let mechs: [(&str, &dyn Fn(&mut RngStream) -> GramEstimate); 5] = [
        ("ridge-jl", &|rng| ridge_jl(&a, &bud, 12, rng).unwrap()),
        ("ridge-jl-adaptive", &|rng| ridge_jl_adaptive(&m, &bud, 10, rng).unwrap()),
        ("wishart", &|rng| additive_wishart(&m, &bud, rng).unwrap()),
        ("inv-wishart", &|rng| inv_wishart(&m, &bud, rng).unwrap()),
        ("inv-wishart-adaptive", &|rng| inv_wishart_adaptive(&m, &bud, 10, rng).unwrap()),
    ];
    for (name, f) in mechs {
        for seed in 0..1000 {
            let est = f(&mut RngStream::from_seed(seed));
            assert!(cholesky(&est.matrix, 0.0).is_ok(), "{name} seed {seed}");
            assert!(est.is_pd, "{name} seed {seed}");
        }
    }
}

fn mean_of(draws: usize, seed: u64, f: impl Fn(&mut RngStream) -> SymMatrix) -> SymMatrix {
    let mut acc = MeanAcc::new();
    for t in 0..draws as u64 {
        acc.push(&f(&mut RngStream::new(seed, t)));
    }
    acc.mean()
}

#[test]
fn ridge_jl_is_unbiased_on_both_routes() {
    let a = gaussian_dataset(2, 60, 3, 1.5);
    let bud = budget(1.0, 1e-4);
    let r = 8;
    let w = jl_width(1.5, r, &bud);
    let truth = gram(&a).shifted(w * w);
    let m = SecondMoment::from_dataset(&a);
    let rows = mean_of(4000, 3, |rng| ridge_jl(&a, &bud, r, rng).unwrap().matrix);
    let moment = mean_of(4000, 4, |rng| ridge_jl(&m, &bud, r, rng).unwrap().matrix);
    assert!(rel_frobenius(&rows, &truth) < 0.05, "rows route {}", rel_frobenius(&rows, &truth));
    assert!(rel_frobenius(&moment, &truth) < 0.05, "moment route {}", rel_frobenius(&moment, &truth));
}

#[test]
fn sketch_routes_share_second_moments() {
    // Var of a diagonal entry of W_d(Σ, r)/r is 2Σ_jj²/r.
    let a = gaussian_dataset(5, 30, 3, 1.0);
    let bud = budget(1.0, 1e-2);
    let r = 6;
    let w = jl_width(1.0, r, &bud);
    let sigma00 = gram(&a).get(0, 0) + w * w;
    let expected = 2.0 * sigma00 * sigma00 / r as f64;
    let m = SecondMoment::from_dataset(&a);
    for (seed, input) in [(6u64, Input::from(&a)), (7, Input::from(&m))] {
        let xs: Vec<f64> = (0..4000)
            .map(|t| ridge_jl(input, &bud, r, &mut RngStream::new(seed, t)).unwrap().matrix.get(0, 0))
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var / expected - 1.0).abs() < 0.1, "seed {seed}: {var} vs {expected}");
    }
}

#[test]
fn analyze_gauss_is_unbiased() {
    let a = gaussian_dataset(8, 80, 3, 1.0);
    let config = MechanismConfig::new(budget(1.0, 1e-5));
    let mean = mean_of(2000, 9, |rng| analyze_gauss(&a, &config, rng).unwrap().matrix);
    assert!(rel_frobenius(&mean, &gram(&a)) < 0.1);
}

#[test]
fn additive_wishart_mean_is_shifted_gram() {
    let a = gaussian_dataset(10, 50, 4, 1.0);
    let bud = budget(0.8, 1e-4);
    let k = wishart_dof(4, &bud).unwrap();
    let mean = mean_of(1000, 11, |rng| additive_wishart(&a, &bud, rng).unwrap().matrix);
    assert!(rel_frobenius(&mean, &gram(&a).shifted(k as f64)) < 0.02);
}

#[test]
fn inverse_wishart_means() {
    let a = gaussian_dataset(12, 40, 3, 1.0);
    let m = SecondMoment::from_dataset(&a);
    let bud = budget(1.0, 1e-3);
    let dof = 43.0;
    let psi = inv_wishart_psi(1.0, 43, &bud);
    let truth = m.gram().shifted(psi).scaled(1.0 / (dof - 3.0 - 1.0));
    let mean = mean_of(4000, 13, |rng| inv_wishart(&m, &bud, rng).unwrap().matrix);
    assert!(rel_frobenius(&mean, &truth) < 0.03, "{}", rel_frobenius(&mean, &truth));

    // pinned unregularized branch: W⁻¹(AᵀA, k*)
    let big = SecondMoment::new(SymMatrix::scaled_identity(3, 2000.0), 5000, 1.0).unwrap();
    let bud = budget(1.0, 8.0 * (-4.0f64).exp());
    let mean = mean_of(4000, 14, |rng| {
        inv_wishart_adaptive_pinned(&big, &bud, 6, rng, Some(SvPin::Estimate(100.0))).unwrap().matrix
    });
    let truth = SymMatrix::scaled_identity(3, 2000.0 / (9.0 - 4.0));
    assert!(rel_frobenius(&mean, &truth) < 0.05, "{}", rel_frobenius(&mean, &truth));
}

#[test]
fn gauss_inverse_centers_on_the_inverse() {
    let m = SecondMoment::new(SymMatrix::scaled_identity(3, 4.0), 100, 1.0).unwrap();
    let bud = budget(1.0, 1e-2);
    let rho = 1.0;
    let sigma = inverse_noise_sigma(rho, &bud);
    let draws = 20_000;
    let mean = mean_of(draws, 15, |rng| gauss_inverse_noise(&m, &bud, rho, rng).unwrap().matrix);
    let se = sigma / (draws as f64).sqrt();
    for i in 0..3 {
        for j in i..3 {
            let target = if i == j { 0.25 } else { 0.0 };
            assert!((mean.get(i, j) - target).abs() < 4.0 * se, "({i},{j}) {}", mean.get(i, j));
        }
    }
    let est = gauss_inverse_noise(&m, &bud, rho, &mut RngStream::from_seed(0)).unwrap();
    assert!(est.calibration.inverse);

    // margin 4 / 1 < 1 + ρ
    let err = gauss_inverse_noise(&m, &bud, 3.5, &mut RngStream::from_seed(0)).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
}

#[test]
fn adaptive_branches_follow_pins() {
    let bud = budget(1.0, 1e-3);
    let m = SecondMoment::new(SymMatrix::scaled_identity(3, 1e6), 10_000, 1.0).unwrap();
    let mut rng = RngStream::from_seed(16);
    let lo = ridge_jl_adaptive_pinned(&m, &bud, 6, &mut rng, Some(SvPin::Estimate(0.0))).unwrap();
    assert_eq!(lo.calibration.branch, Some(Branch::Regularized));
    assert_eq!(lo.calibration.r, Some(6));
    assert!((lo.calibration.w.unwrap().powi(2) - adaptive_jl_width_squared(1.0, 6, &bud)).abs() < 1e-9);
    let hi = ridge_jl_adaptive_pinned(&m, &bud, 6, &mut rng, Some(SvPin::Estimate(1e5))).unwrap();
    assert_eq!(hi.calibration.branch, Some(Branch::Unregularized));
    assert_eq!(hi.calibration.r, Some(rows_within_budget(1e5, 1.0, &bud).unwrap()));

    let lo = inv_wishart_adaptive_pinned(&m, &bud, 6, &mut rng, Some(SvPin::Estimate(0.0))).unwrap();
    assert_eq!(lo.calibration.branch, Some(Branch::Regularized));
    let hi = inv_wishart_adaptive_pinned(&m, &bud, 6, &mut rng, Some(SvPin::Estimate(1e5))).unwrap();
    assert_eq!(hi.calibration.branch, Some(Branch::Unregularized));

    // unpinned at a large σ_min goes unregularized
    let est = ridge_jl_adaptive(&m, &bud, 6, &mut rng).unwrap();
    assert_eq!(est.calibration.branch, Some(Branch::Unregularized));
}

#[test]
fn bias_correction_keeps_pd() {
    let a = gaussian_dataset(17, 20, 4, 1.0);
    let bud = budget(1.0, 1e-3);
    let k = wishart_dof(4, &bud).unwrap();
    let c2 = wishart_lower_shift(4, k, 1.0, &bud).unwrap();
    for seed in 0..200 {
        let raw = additive_wishart(&a, &bud, &mut RngStream::from_seed(seed)).unwrap();
        let out = wishart_bias_correct(&raw, &bud).unwrap();
        assert!(out.is_pd);
        let shift = out.calibration.shift.unwrap();
        assert!(shift == 0.0 || shift == k as f64 || shift == c2, "shift {shift}");
        assert!(rel_frobenius(&out.matrix.shifted(shift), &raw.matrix) < 1e-12);
    }
}

#[test]
fn ag_scaled_constants_agree() {
    let d = 22;
    let m = SecondMoment::new(SymMatrix::zeros(d), 100, 1.0).unwrap();
    let mut config = MechanismConfig::new(budget(0.5, 1e-5));
    let raw = analyze_gauss(&m, &config, &mut RngStream::from_seed(18)).unwrap();
    assert!(!raw.is_pd);
    let analytic = ag_scaled(&raw, &config, &mut RngStream::from_seed(19)).unwrap();
    config.ag_scale_constant_mode = AgScaleMode::MonteCarlo;
    let mc = ag_scaled(&raw, &config, &mut RngStream::from_seed(19)).unwrap();
    let (ca, cm) = (analytic.calibration.shift.unwrap(), mc.calibration.shift.unwrap());
    assert!((cm / ca - 1.0).abs() < 0.15, "analytic {ca}, monte carlo {cm}");
}

#[test]
fn run_replays_every_mechanism() {
    let a = gaussian_dataset(20, 60, 4, 1.0);
    let m = SecondMoment::from_dataset(&a);
    let mut config = MechanismConfig::new(budget(1.0, 1e-3));
    config.rho = Some(0.1);
    let big = SecondMoment::new(m.gram().shifted(10.0), 60, 1.0).unwrap();
    for id in MechanismId::ALL {
        let input = if id == MechanismId::GaussInverse { &big } else { &m };
        let once = run(id, input, &config, &mut RngStream::new(21, 3)).unwrap();
        let again = run(id, input, &config, &mut RngStream::new(21, 3)).unwrap();
        assert_eq!(once, again, "{id}");
        assert_eq!(once.mechanism, id);
        assert_eq!(once.seed, 21);
    }
    assert_eq!(run(MechanismId::Exact, &m, &config, &mut RngStream::from_seed(0)).unwrap().matrix, *m.gram());
}

#[test]
fn precondition_errors() {
    let a = gaussian_dataset(22, 30, 4, 1.0);
    let bud = budget(1.0, 1e-3);
    let mut rng = RngStream::from_seed(0);
    assert!(matches!(ridge_jl(&a, &bud, 4, &mut rng), Err(Error::InvalidInput(_))));
    assert!(matches!(additive_wishart(&a, &budget(1.5, 1e-3), &mut rng), Err(Error::InvalidInput(_))));
    assert!(matches!(inv_wishart_adaptive(&a, &bud, 3, &mut rng), Err(Error::InvalidInput(_))));
    let config = MechanismConfig::new(bud);
    assert!(run(MechanismId::GaussInverse, &a, &config, &mut rng).is_err());
}
