//! Synthetic regression data, trial runner and experiment grids.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};
use gramdp::dataset::{clip_row, GramAccumulator};
use gramdp::mechanisms::{self, AgConvention, AgScaleMode, Branch, Calibration, Input, MechanismConfig, MechanismId};
use gramdp::rng::stream_id_of;
use gramdp::sampling::fill_standard_normal;
use gramdp::{l2_error, solve_from_gram, Coefficients, Dataset, PrivacyBudget, RegressionTask, RngStream, SecondMoment};
use rand::Rng;
use rayon::prelude::*;

/// `B = √(2.5 d)`.
pub fn row_bound_for(dim: usize) -> f64 {
    (2.5 * dim as f64).sqrt()
}

fn draw_uniform(rng: &mut RngStream, len: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..=hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One label regressed on `p` standard normal features (plus an intercept).
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRegressionConfig {
    pub p: usize,
    /// Standard deviation of the label noise.
    pub noise_sd: f64,
    pub n: usize,
    pub beta_range: (f64, f64),
    pub intercept: bool,
}

impl SingleRegressionConfig {
    pub fn new(n: usize) -> Self {
        Self {
            p: 20,
            noise_sd: 0.5,
            n,
            beta_range: (-1.0, 1.0),
            intercept: true,
        }
    }

    /// Columns `[X | 1 | y]`, or `[X | y]` without an intercept.
    pub fn dim(&self) -> usize {
        self.p + usize::from(self.intercept) + 1
    }

    pub fn row_bound(&self) -> f64 {
        row_bound_for(self.dim())
    }

    pub fn task(&self) -> RegressionTask {
        RegressionTask::last_column(self.dim()).expect("dim >= 2")
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            bail!("p must be at least 1");
        }
        if self.n < self.dim() {
            bail!("n = {} is below the dimension {}", self.n, self.dim());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            bail!("noise_sd must be non-negative, got {}", self.noise_sd);
        }
        if !(self.beta_range.0 <= self.beta_range.1) {
            bail!("empty beta range");
        }
        Ok(())
    }

    /// Draws `β`, then streams clipped rows into `sink`; returns `β`.
    fn stream(&self, rng: &mut RngStream, mut sink: impl FnMut(&[f64])) -> Result<Coefficients> {
        self.validate()?;
        let (p, d) = (self.p, self.dim());
        let beta = draw_uniform(rng, p + usize::from(self.intercept), self.beta_range);
        let b = self.row_bound();
        let mut row = vec![0.0; d];
        let mut noise = [0.0];
        for _ in 0..self.n {
            fill_standard_normal(rng, &mut row[..p]);
            fill_standard_normal(rng, &mut noise);
            if self.intercept {
                row[p] = 1.0;
            }
            row[d - 1] = dot(&row[..d - 1], &beta) + self.noise_sd * noise[0];
            clip_row(&mut row, b);
            sink(&row);
        }
        Ok(Coefficients::new(beta)?)
    }
}

/// `p` independent features, the intercept, and `p` labels `yᵢ = Xβᵢ + eᵢ`.
/// The task regresses `y_label` on `[X | 1]` plus `m` of the other labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRegressionConfig {
    pub p: usize,
    pub m: usize,
    /// Which of the `p` labels is regressed, counted from 0.
    pub label_index: usize,
    pub noise_sd: f64,
    pub n: usize,
}

impl MultiRegressionConfig {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            p: 20,
            m,
            label_index: 19,
            noise_sd: 0.5,
            n,
        }
    }

    /// Columns `[X | 1 | y₁ … y_p]`.
    pub fn dim(&self) -> usize {
        2 * self.p + 1
    }

    pub fn row_bound(&self) -> f64 {
        row_bound_for(self.dim())
    }

    /// Label indices (counted from 0) used as extra features.
    pub fn extra_labels(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| j != self.label_index).take(self.m).collect()
    }

    pub fn task(&self) -> RegressionTask {
        let first_y = self.p + 1;
        let mut features: Vec<usize> = (0..first_y).collect();
        features.extend(self.extra_labels().into_iter().map(|j| first_y + j));
        RegressionTask::new(first_y + self.label_index, features, self.dim()).expect("validated indices")
    }

    fn validate(&self) -> Result<()> {
        if self.p < 1 {
            bail!("p must be at least 1");
        }
        if self.m + 1 > self.p {
            bail!("m = {} must be at most p - 1 = {}", self.m, self.p - 1);
        }
        if self.label_index >= self.p {
            bail!("label index {} out of range for p = {}", self.label_index, self.p);
        }
        if self.n < self.dim() {
            bail!("n = {} is below the dimension {}", self.n, self.dim());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            bail!("noise_sd must be non-negative, got {}", self.noise_sd);
        }
        Ok(())
    }

    fn stream(&self, rng: &mut RngStream, mut sink: impl FnMut(&[f64])) -> Result<Coefficients> {
        self.validate()?;
        let (p, d) = (self.p, self.dim());
        let betas: Vec<Vec<f64>> = (0..p).map(|_| draw_uniform(rng, p + 1, (-1.0, 1.0))).collect();
        let b = self.row_bound();
        let mut row = vec![0.0; d];
        let mut noise = vec![0.0; p];
        for _ in 0..self.n {
            fill_standard_normal(rng, &mut row[..p]);
            fill_standard_normal(rng, &mut noise);
            row[p] = 1.0;
            for (i, beta) in betas.iter().enumerate() {
                row[p + 1 + i] = dot(&row[..=p], beta) + self.noise_sd * noise[i];
            }
            clip_row(&mut row, b);
            sink(&row);
        }
        Ok(Coefficients::new(betas[self.label_index].clone())?.padded(p + 1 + self.m)?)
    }
}

fn collect_rows(
    n: usize,
    d: usize,
    b: f64,
    stream: impl FnOnce(&mut dyn FnMut(&[f64])) -> Result<Coefficients>,
) -> Result<(Dataset, Coefficients)> {
    let mut data = Vec::with_capacity(n * d);
    let truth = stream(&mut |row| data.extend_from_slice(row))?;
    Ok((Dataset::new(data, d, b)?, truth))
}

fn accumulate(d: usize, b: f64, stream: impl FnOnce(&mut dyn FnMut(&[f64])) -> Result<Coefficients>) -> Result<(SecondMoment, Coefficients)> {
    let mut acc = GramAccumulator::new(d);
    let truth = stream(&mut |row| acc.push(row))?;
    Ok((acc.finish(b)?, truth))
}

/// Data set `[X | 1 | y]` clipped at `B = √(2.5d)` and the generating `β` over `[X | 1]`.
pub fn gen_single(config: &SingleRegressionConfig, rng: &mut RngStream) -> Result<(Dataset, Coefficients)> {
    collect_rows(config.n, config.dim(), config.row_bound(), |sink| config.stream(rng, sink))
}

/// Same draw as [`gen_single`], accumulated straight into `AᵀA` without storing rows.
pub fn gen_single_moment(config: &SingleRegressionConfig, rng: &mut RngStream) -> Result<(SecondMoment, Coefficients)> {
    accumulate(config.dim(), config.row_bound(), |sink| config.stream(rng, sink))
}

/// Data set `[X | 1 | y₁ … y_p]` and `β_label` over `[X | 1]`, zero-padded over the `m` extra labels.
pub fn gen_multi(config: &MultiRegressionConfig, rng: &mut RngStream) -> Result<(Dataset, Coefficients)> {
    collect_rows(config.n, config.dim(), config.row_bound(), |sink| config.stream(rng, sink))
}

/// Same draw as [`gen_multi`], accumulated straight into `AᵀA`.
pub fn gen_multi_moment(config: &MultiRegressionConfig, rng: &mut RngStream) -> Result<(SecondMoment, Coefficients)> {
    accumulate(config.dim(), config.row_bound(), |sink| config.stream(rng, sink))
}

/// Which synthetic design an experiment uses; `n` is overridden per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Single(SingleRegressionConfig),
    Multi(MultiRegressionConfig),
}

impl Scenario {
    pub fn dim(&self) -> usize {
        match self {
            Scenario::Single(c) => c.dim(),
            Scenario::Multi(c) => c.dim(),
        }
    }

    pub fn task(&self) -> RegressionTask {
        match self {
            Scenario::Single(c) => c.task(),
            Scenario::Multi(c) => c.task(),
        }
    }

    pub fn generate(&self, n: usize, rng: &mut RngStream) -> Result<(SecondMoment, Coefficients)> {
        match self {
            Scenario::Single(c) => gen_single_moment(&SingleRegressionConfig { n, ..c.clone() }, rng),
            Scenario::Multi(c) => gen_multi_moment(&MultiRegressionConfig { n, ..c.clone() }, rng),
        }
    }
}

/// One mechanism run on one data draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub mechanism: MechanismId,
    pub n: usize,
    pub epsilon: f64,
    pub trial: usize,
    /// Stream id of the mechanism's [`RngStream`] under the master seed.
    pub seed: u64,
    /// `None` when the mechanism or the solve failed.
    pub error_l2: Option<f64>,
    pub failure: Option<String>,
    pub calibration: Calibration,
    pub wall_time_ms: f64,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error_l2.is_none()
    }

    pub fn branch(&self) -> Option<Branch> {
        self.calibration.branch
    }

    /// Everything except the timing column.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { wall_time_ms: 0.0, ..self.clone() } == Self { wall_time_ms: 0.0, ..other.clone() }
    }
}

/// Runs `id`, solves `task` on the release and measures the distance to `truth`.
/// Failures are captured in the record.
pub fn run_trial(
    input: Input<'_>,
    truth: &Coefficients,
    id: MechanismId,
    config: &MechanismConfig,
    task: &RegressionTask,
    trial: usize,
    rng: &mut RngStream,
) -> TrialRecord {
    let seed = rng.stream_id();
    let start = Instant::now();
    let outcome = mechanisms::run(id, input, config, rng).map(|est| {
        let error = solve_from_gram(&est.matrix, task).and_then(|b| l2_error(&b, truth));
        (est.calibration, error)
    });
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let (calibration, error) = match outcome {
        Ok((c, e)) => (c, e),
        Err(e) => (Calibration::default(), Err(e)),
    };
    let (error_l2, failure) = match error {
        Ok(e) if e.is_finite() => (Some(e), None),
        Ok(e) => (None, Some(format!("non-finite error {e}"))),
        Err(e) => (None, Some(e.to_string())),
    };
    TrialRecord {
        mechanism: id,
        n: input.rows(),
        epsilon: config.budget.epsilon(),
        trial,
        seed,
        error_l2,
        failure,
        calibration,
        wall_time_ms,
    }
}

/// Degrees of freedom handed to `inv-wishart-adaptive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K0Choice {
    TwiceDim,
    RowsPlusDim,
}

/// Row count handed to the fixed `ridge-jl` mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JlRows {
    /// Whatever `ridge-jl-adaptive` chose on the same data and budget.
    MatchAdaptive,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub n_values: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub trials: usize,
    pub mechanisms: Vec<MechanismId>,
    pub master_seed: u64,
    /// Minimal rows for `ridge-jl-adaptive`; `2d` when absent.
    pub r0: Option<usize>,
    pub k0: K0Choice,
    pub jl_rows: JlRows,
    pub ag_convention: AgConvention,
    pub ag_scale_mode: AgScaleMode,
}

/// The mechanisms compared in the single-regression experiments.
pub const SINGLE_MECHANISMS: [MechanismId; 10] = [
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
];

/// The baseline and the six mechanisms compared on correlated data.
pub const MULTI_MECHANISMS: [MechanismId; 7] = [
    MechanismId::Exact,
    MechanismId::AnalyzeGauss,
    MechanismId::RidgeJlAdaptive,
    MechanismId::AdditiveWishart,
    MechanismId::AgScaled,
    MechanismId::InvWishartAdaptive,
    MechanismId::WishartCorrected,
];

impl ExperimentGrid {
    pub fn single_default() -> Self {
        Self {
            n_values: (14..=25).map(|k| 1usize << k).collect(),
            epsilons: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.5],
            delta: (-9.0f64).exp(),
            trials: 15,
            mechanisms: SINGLE_MECHANISMS.to_vec(),
            master_seed: 0,
            r0: None,
            k0: K0Choice::TwiceDim,
            jl_rows: JlRows::MatchAdaptive,
            ag_convention: AgConvention::default(),
            ag_scale_mode: AgScaleMode::default(),
        }
    }

    pub fn multi_default() -> Self {
        Self {
            n_values: (12..=27).map(|k| 1usize << k).collect(),
            epsilons: vec![0.1],
            mechanisms: MULTI_MECHANISMS.to_vec(),
            ..Self::single_default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.n_values.is_empty() || self.epsilons.is_empty() || self.mechanisms.is_empty() {
            bail!("n, epsilon and mechanism lists must be nonempty");
        }
        if self.mechanisms.contains(&MechanismId::GaussInverse) {
            bail!("gauss-inverse needs a public spectral margin and is not part of the experiments");
        }
        for &eps in &self.epsilons {
            PrivacyBudget::new(eps, self.delta)?;
        }
        Ok(())
    }

    fn config_for(&self, id: MechanismId, budget: PrivacyBudget, n: usize, d: usize) -> MechanismConfig {
        let mut config = MechanismConfig::new(budget);
        config.ag_variance_convention = self.ag_convention;
        config.ag_scale_constant_mode = self.ag_scale_mode;
        config.r0_or_k0 = match id {
            MechanismId::RidgeJlAdaptive => Some(self.r0.unwrap_or(2 * d)),
            MechanismId::InvWishartAdaptive => Some(match self.k0 {
                K0Choice::TwiceDim => 2 * d,
                K0Choice::RowsPlusDim => n + d,
            }),
            _ => None,
        };
        config
    }
}

const DATA_STREAM: u64 = 0xDA7A;
const MECH_STREAM: u64 = 0x3EC4;

fn mechanism_stream(master: u64, n: usize, trial: usize, eps: f64, id: MechanismId) -> RngStream {
    let index = MechanismId::ALL.iter().position(|&m| m == id).expect("listed") as u64;
    RngStream::new(master, stream_id_of(&[MECH_STREAM, n as u64, trial as u64, eps.to_bits(), index]))
}

fn run_unit(grid: &ExperimentGrid, scenario: &Scenario, n: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let mut data_rng = RngStream::new(grid.master_seed, stream_id_of(&[DATA_STREAM, n as u64, trial as u64]));
    let (moment, truth) = scenario.generate(n, &mut data_rng)?;
    let d = moment.dim();
    let task = scenario.task();
    let mut out = Vec::new();
    for &eps in &grid.epsilons {
        let budget = PrivacyBudget::new(eps, grid.delta)?;
        for &id in &grid.mechanisms {
            let mut config = grid.config_for(id, budget, n, d);
            if id == MechanismId::RidgeJl {
                config.r = Some(match grid.jl_rows {
                    JlRows::Fixed(r) => r,
                    JlRows::MatchAdaptive => {
                        let adaptive = MechanismId::RidgeJlAdaptive;
                        let mut rng = mechanism_stream(grid.master_seed, n, trial, eps, adaptive);
                        mechanisms::run(adaptive, &moment, &grid.config_for(adaptive, budget, n, d), &mut rng)
                            .ok()
                            .and_then(|est| est.calibration.r)
                            .map_or(2 * d, |r| r as usize)
                    }
                });
            }
            let mut rng = mechanism_stream(grid.master_seed, n, trial, eps, id);
            out.push(run_trial(Input::from(&moment), &truth, id, &config, &task, trial, &mut rng));
        }
    }
    Ok(out)
}

/// Every trial of every cell, sorted by mechanism, n, ε and trial index.
///
/// One fresh data set is drawn per `(n, trial)` and shared by all mechanisms
/// and budgets of that trial.
pub fn run_grid(grid: &ExperimentGrid, scenario: &Scenario) -> Result<Vec<TrialRecord>> {
    grid.validate()?;
    let units: Vec<(usize, usize)> = grid
        .n_values
        .iter()
        .flat_map(|&n| (0..grid.trials).map(move |t| (n, t)))
        .collect();
    let mut records: Vec<TrialRecord> = units
        .par_iter()
        .map(|&(n, t)| run_unit(grid, scenario, n, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    records.sort_by(|a, b| {
        a.mechanism
            .as_str()
            .cmp(b.mechanism.as_str())
            .then(a.n.cmp(&b.n))
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(records)
}

/// Mean and sample standard deviation of the successful trials of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mechanism: MechanismId,
    pub n: usize,
    pub epsilon: f64,
    pub mean_error: Option<f64>,
    pub sd_error: Option<f64>,
    pub fail_count: usize,
    pub trials: usize,
}

/// One row per `(mechanism, n, ε)` cell, in the order of the (sorted) records.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut errors: Vec<Vec<f64>> = Vec::new();
    for r in records {
        let same = rows
            .last()
            .is_some_and(|s| s.mechanism == r.mechanism && s.n == r.n && s.epsilon == r.epsilon);
        if !same {
            rows.push(SummaryRow {
                mechanism: r.mechanism,
                n: r.n,
                epsilon: r.epsilon,
                mean_error: None,
                sd_error: None,
                fail_count: 0,
                trials: 0,
            });
            errors.push(Vec::new());
        }
        let row = rows.last_mut().expect("pushed");
        row.trials += 1;
        match r.error_l2 {
            Some(e) => errors.last_mut().expect("pushed").push(e),
            None => row.fail_count += 1,
        }
    }
    for (row, errs) in rows.iter_mut().zip(&errors) {
        if errs.is_empty() {
            continue;
        }
        let k = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / k;
        let var = if errs.len() > 1 {
            errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        row.mean_error = Some(mean);
        row.sd_error = Some(var.sqrt());
    }
    rows
}

/// Summary-level sanity warnings: the non-private baseline should have the
/// smallest mean error for `n ≥ 2^16`, and bias correction should not hurt.
pub fn ordering_warnings(summary: &[SummaryRow]) -> Vec<String> {
    let find = |id, n, eps| {
        summary
            .iter()
            .find(|s| s.mechanism == id && s.n == n && s.epsilon == eps)
            .and_then(|s| s.mean_error)
    };
    let mut out = Vec::new();
    for s in summary.iter().filter(|s| s.n >= 1 << 16) {
        let Some(mean) = s.mean_error else { continue };
        if s.mechanism != MechanismId::Exact {
            if let Some(base) = find(MechanismId::Exact, s.n, s.epsilon) {
                if base > mean {
                    out.push(format!(
                        "n={} eps={}: {} mean error {mean:.4} is below the non-private {base:.4}",
                        s.n, s.epsilon, s.mechanism
                    ));
                }
            }
        }
        if s.mechanism == MechanismId::WishartCorrected {
            if let Some(raw) = find(MechanismId::AdditiveWishart, s.n, s.epsilon) {
                if mean > raw {
                    out.push(format!(
                        "n={} eps={}: bias-corrected Wishart {mean:.4} is worse than raw {raw:.4}",
                        s.n, s.epsilon
                    ));
                }
            }
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:?}"))
}

pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mechanism", "n", "epsilon", "trial", "seed", "error_l2", "failed", "branch", "calibration", "wall_time_ms",
    ])?;
    for r in records {
        let calibration = r
            .calibration
            .entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.mechanism.as_str().to_string(),
            r.n.to_string(),
            format!("{:?}", r.epsilon),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_opt(r.error_l2),
            r.failed().to_string(),
            r.branch().map_or("", |b| b.as_str()).to_string(),
            calibration,
            format!("{:.3}", r.wall_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mechanism", "n", "epsilon", "mean_error", "sd_error", "fail_count"])?;
    for s in rows {
        w.write_record([
            s.mechanism.as_str().to_string(),
            s.n.to_string(),
            format!("{:?}", s.epsilon),
            fmt_opt(s.mean_error),
            fmt_opt(s.sd_error),
            s.fail_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the grid and writes `trials.csv` and `summary.csv` into `out_dir`.
pub fn run_experiment(grid: &ExperimentGrid, scenario: &Scenario, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    let records = run_grid(grid, scenario)?;
    let summary = summarize(&records);
    std::fs::create_dir_all(out_dir)?;
    write_trials_csv(&out_dir.join("trials.csv"), &records)?;
    write_summary_csv(&out_dir.join("summary.csv"), &summary)?;
    Ok(summary)
}
