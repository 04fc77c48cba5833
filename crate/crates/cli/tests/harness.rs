use gramdp::linalg::Matrix;
use gramdp::mechanisms::{Input, MechanismConfig, MechanismId};
use gramdp::regress::ols;
use gramdp::{gram, l2_error, solve_from_gram, PrivacyBudget, RngStream, SecondMoment};
use gramdp_cli::harness::*;

fn budget(eps: f64) -> PrivacyBudget {
    PrivacyBudget::new(eps, (-9.0f64).exp()).unwrap()
}

#[test]
fn noiseless_single_data_recovers_beta() {
    let config = SingleRegressionConfig { noise_sd: 0.0, ..SingleRegressionConfig::new(2000) };
    let (data, truth) = gen_single(&config, &mut RngStream::from_seed(1)).unwrap();
    assert_eq!(data.cols(), 22);
    assert_eq!(truth.len(), 21);
    let beta = solve_from_gram(&gram(&data), &config.task()).unwrap();
    assert!(l2_error(&beta, &truth).unwrap() < 1e-8);
    // the last column is the label, the one before it the (possibly rescaled) intercept
    let x = Matrix::from_fn(data.rows(), 21, |i, j| data.row(i)[j]);
    let direct = ols(&x, &data.column(21)).unwrap();
    assert!(l2_error(&direct, &truth).unwrap() < 1e-8);
}

/// P(row clipped | β) by quadrature. Along β_x/‖β_x‖ the row is (u, s·u + c + σz);
/// the p−1 orthogonal features contribute an independent χ²_{p−1}.
fn clip_probability_oracle(beta: &[f64], noise_sd: f64, bound: f64) -> f64 {
    let p = beta.len() - 1;
    let s = beta[..p].iter().map(|b| b * b).sum::<f64>().sqrt();
    let c = beta[p];
    let k = (p - 1) as f64;
    // χ²_k survival on a grid, integrated down from the far tail
    let (h, top) = (1e-3, 400.0);
    let steps = (top / h) as usize;
    let ln_norm = -(k / 2.0) * 2f64.ln() - ln_gamma(k / 2.0);
    let pdf = |x: f64| if x <= 0.0 { 0.0 } else { (ln_norm + (k / 2.0 - 1.0) * x.ln() - x / 2.0).exp() };
    let mut survival = vec![0.0; steps + 1];
    for i in (0..steps).rev() {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        survival[i] = survival[i + 1] + 0.5 * h * (pdf(a) + pdf(b));
    }
    let tail = |t: f64| if t <= 0.0 { 1.0 } else if t >= top { 0.0 } else { survival[(t / h) as usize] };
    let (g, span) = (0.01, 8.0);
    let nodes = (2.0 * span / g) as usize;
    let phi = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for i in 0..=nodes {
        let u = -span + i as f64 * g;
        for j in 0..=nodes {
            let z = -span + j as f64 * g;
            let y = s * u + c + noise_sd * z;
            total += phi(u) * phi(z) * g * g * tail(bound * bound - u * u - 1.0 - y * y);
        }
    }
    total
}

fn ln_gamma(x: f64) -> f64 {
    // half-integer or integer arguments only
    let mut v = x;
    let mut acc = 0.0;
    while v > 1.0 {
        v -= 1.0;
        acc += v.ln();
    }
    if (v - 0.5).abs() < 1e-12 {
        acc + 0.5 * std::f64::consts::PI.ln()
    } else {
        acc
    }
}

#[test]
fn beta_norms_and_clipping_rate() {
    let config = SingleRegressionConfig::new(20_000);
    let trials = 15;
    let mut norms = 0.0;
    let mut clipped = 0;
    let mut expected = 0.0;
    for t in 0..trials {
        let (data, truth) = gen_single(&config, &mut RngStream::new(2, t)).unwrap();
        norms += truth.norm() / trials as f64;
        let b = data.row_bound();
        clipped += data
            .iter_rows()
            .filter(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt() >= b * (1.0 - 1e-12))
            .count();
        expected += clip_probability_oracle(truth.values(), config.noise_sd, b) / trials as f64;
    }
    assert!((2.2..=3.1).contains(&norms), "mean |beta| {norms}");
    let total = (trials as usize * 20_000) as f64;
    let rate = clipped as f64 / total;
    let se = (expected * (1.0 - expected) / total).sqrt();
    assert!((rate - expected).abs() < 5.0 * se, "clipped fraction {rate}, oracle {expected}");
    // the label direction inflates the norm well past a χ²_d tail, but clipping stays rare
    assert!(rate < 0.06, "clipped fraction {rate}");
}

#[test]
fn oracle_matches_pure_chi_square_without_signal() {
    // β = 0, σ = 0: ‖row‖² = χ²_p + 1, and P(χ²_20 > 20) ≈ 0.45793
    let beta = vec![0.0; 21];
    let got = clip_probability_oracle(&beta, 0.0, 21f64.sqrt());
    assert!((got - 0.457_929_714_471_0).abs() < 2e-3, "{got}");
}

#[test]
fn streamed_moment_matches_stored_rows() {
    let config = SingleRegressionConfig::new(500);
    let (data, truth) = gen_single(&config, &mut RngStream::from_seed(3)).unwrap();
    let (moment, truth2) = gen_single_moment(&config, &mut RngStream::from_seed(3)).unwrap();
    assert_eq!(truth, truth2);
    assert_eq!(moment, SecondMoment::from_dataset(&data));

    let multi = MultiRegressionConfig::new(300, 2);
    let (data, truth) = gen_multi(&multi, &mut RngStream::from_seed(4)).unwrap();
    let (moment, truth2) = gen_multi_moment(&multi, &mut RngStream::from_seed(4)).unwrap();
    assert_eq!(truth, truth2);
    assert_eq!(moment, SecondMoment::from_dataset(&data));
}

#[test]
fn multi_task_shapes_and_noiseless_recovery() {
    for m in 0..4 {
        let config = MultiRegressionConfig { noise_sd: 0.0, ..MultiRegressionConfig::new(1000, m) };
        let (data, truth) = gen_multi(&config, &mut RngStream::new(5, m as u64)).unwrap();
        assert_eq!(data.cols(), 41);
        assert_eq!(truth.len(), 21 + m);
        let task = config.task();
        assert_eq!(task.features().len(), 21 + m);
        assert!(!task.features().contains(&task.label()));
        if m == 0 {
            assert_eq!(task.features(), SingleRegressionConfig::new(1).task().features());
            let beta = solve_from_gram(&gram(&data), &task).unwrap();
            assert!(l2_error(&beta, &truth).unwrap() < 1e-8);
        }
        assert!(truth.values()[21..].iter().all(|&v| v == 0.0));
    }
    assert!(gen_multi(&MultiRegressionConfig::new(100, 20), &mut RngStream::from_seed(0)).is_err());
}

#[test]
fn baseline_trial_is_plain_ols() {
    let config = SingleRegressionConfig::new(3000);
    let (data, truth) = gen_single(&config, &mut RngStream::from_seed(6)).unwrap();
    let moment = SecondMoment::from_dataset(&data);
    let mc = MechanismConfig::new(budget(0.5));
    let rec = run_trial(Input::from(&moment), &truth, MechanismId::Exact, &mc, &config.task(), 0, &mut RngStream::new(7, 1));
    let x = Matrix::from_fn(data.rows(), 21, |i, j| data.row(i)[j]);
    let direct = l2_error(&ols(&x, &data.column(21)).unwrap(), &truth).unwrap();
    assert!((rec.error_l2.unwrap() - direct).abs() < 1e-10);
    assert_eq!(rec.n, 3000);
    assert_eq!(rec.seed, 1);

    let again = |id| run_trial(Input::from(&moment), &truth, id, &mc, &config.task(), 0, &mut RngStream::new(7, 2));
    assert!(again(MechanismId::AdditiveWishart).same_outcome(&again(MechanismId::AdditiveWishart)));
}

#[test]
fn failures_are_recorded_not_raised() {
    // a rank-deficient feature block makes the exact solve fail
    let m = SecondMoment::new(gramdp::linalg::SymMatrix::diagonal_from(&[1.0, 0.0, 1.0]), 10, 1.0).unwrap();
    let truth = gramdp::Coefficients::new(vec![0.0, 0.0]).unwrap();
    let task = gramdp::RegressionTask::last_column(3).unwrap();
    let rec = run_trial(Input::from(&m), &truth, MechanismId::Exact, &MechanismConfig::new(budget(1.0)), &task, 0, &mut RngStream::from_seed(0));
    assert!(rec.failed());
    assert!(rec.failure.is_some());
}

fn small_grid(trials: usize) -> ExperimentGrid {
    ExperimentGrid {
        n_values: vec![1 << 12],
        epsilons: vec![0.5],
        trials,
        mechanisms: vec![MechanismId::Exact, MechanismId::RidgeJl, MechanismId::AgScaled],
        master_seed: 11,
        ..ExperimentGrid::single_default()
    }
}

#[test]
fn grid_counts_and_summary_means() {
    let grid = ExperimentGrid { mechanisms: vec![MechanismId::WishartCorrected], ..small_grid(15) };
    let scenario = Scenario::Single(SingleRegressionConfig::new(0));
    let records = run_grid(&grid, &scenario).unwrap();
    assert_eq!(records.len(), 15);
    let summary = summarize(&records);
    assert_eq!(summary.len(), 1);
    let errors: Vec<f64> = records.iter().map(|r| r.error_l2.unwrap()).collect();
    let mean = errors.iter().sum::<f64>() / 15.0;
    assert!((summary[0].mean_error.unwrap() - mean).abs() < 1e-12);
    let sd = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 14.0).sqrt();
    assert!((summary[0].sd_error.unwrap() - sd).abs() < 1e-12);
    assert!(records.windows(2).all(|w| w[0].trial < w[1].trial));
}

#[test]
fn ridge_jl_reuses_the_adaptive_rows() {
    let grid = ExperimentGrid {
        mechanisms: vec![MechanismId::RidgeJl, MechanismId::RidgeJlAdaptive],
        ..small_grid(3)
    };
    let records = run_grid(&grid, &Scenario::Single(SingleRegressionConfig::new(0))).unwrap();
    for t in 0..3 {
        let pick = |id| records.iter().find(|r| r.mechanism == id && r.trial == t).unwrap().calibration.r;
        assert_eq!(pick(MechanismId::RidgeJl), pick(MechanismId::RidgeJlAdaptive));
    }
}

fn without_timing(path: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn experiment_files_replay() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::Multi(MultiRegressionConfig::new(0, 1));
    let grid = ExperimentGrid {
        mechanisms: vec![MechanismId::Exact, MechanismId::AnalyzeGauss, MechanismId::AgScaled],
        ..small_grid(4)
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&grid, &scenario, &a).unwrap();
    run_experiment(&grid, &scenario, &b).unwrap();
    assert_eq!(without_timing(&a.join("trials.csv")), without_timing(&b.join("trials.csv")));
    assert_eq!(
        std::fs::read(a.join("summary.csv")).unwrap(),
        std::fs::read(b.join("summary.csv")).unwrap()
    );
    let header = std::fs::read_to_string(a.join("trials.csv")).unwrap();
    assert!(header.starts_with("mechanism,n,epsilon,trial,seed,error_l2,failed,branch,calibration,wall_time_ms"));
    assert_eq!(header.lines().count(), 1 + 12);
}

#[test]
fn analyze_gauss_error_shrinks_with_sigma_min() {
    let grid = ExperimentGrid {
        n_values: vec![1 << 12, 1 << 16],
        epsilons: vec![0.5],
        trials: 8,
        mechanisms: vec![MechanismId::AnalyzeGauss],
        ..ExperimentGrid::single_default()
    };
    let summary = summarize(&run_grid(&grid, &Scenario::Single(SingleRegressionConfig::new(0))).unwrap());
    let (small, large) = (summary[0].mean_error.unwrap(), summary[1].mean_error.unwrap());
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn grid_validation() {
    let scenario = Scenario::Single(SingleRegressionConfig::new(0));
    assert!(run_grid(&ExperimentGrid { trials: 0, ..small_grid(1) }, &scenario).is_err());
    assert!(run_grid(&ExperimentGrid { mechanisms: vec![MechanismId::GaussInverse], ..small_grid(1) }, &scenario).is_err());
    assert!(run_grid(&ExperimentGrid { epsilons: vec![], ..small_grid(1) }, &scenario).is_err());
}

#[test]
fn ordering_warnings_flag_inversions() {
    let row = |mechanism, mean| SummaryRow {
        mechanism,
        n: 1 << 16,
        epsilon: 0.1,
        mean_error: Some(mean),
        sd_error: Some(0.0),
        fail_count: 0,
        trials: 1,
    };
    let ok = [row(MechanismId::Exact, 0.1), row(MechanismId::AdditiveWishart, 2.0), row(MechanismId::WishartCorrected, 1.0)];
    assert!(ordering_warnings(&ok).is_empty());
    let bad = [row(MechanismId::Exact, 0.5), row(MechanismId::AdditiveWishart, 0.2), row(MechanismId::WishartCorrected, 0.3)];
    assert_eq!(ordering_warnings(&bad).len(), 3);
}
