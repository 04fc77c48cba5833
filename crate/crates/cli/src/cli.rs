//! Argument parsing and subcommand dispatch for the `gramdp` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gramdp::mechanisms::{self, AgConvention, AgScaleMode, MechanismConfig, MechanismId};
use gramdp::statcheck::{run_check, run_suite, CHECK_IDS};
use gramdp::{solve_from_gram, PrivacyBudget, RegressionTask, RngStream};

use crate::harness::{
    gen_multi, gen_single, ordering_warnings, run_experiment, ExperimentGrid, JlRows, K0Choice, MultiRegressionConfig,
    Scenario, SingleRegressionConfig,
};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "gramdp", version, about = "Differentially private second-moment matrices and regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Eps2,
    Eps1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum K0Arg {
    #[value(name = "2d")]
    TwiceDim,
    #[value(name = "n+d")]
    RowsPlusDim,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic regression data set (and its true coefficients).
    Gen {
        #[arg(long, value_enum, default_value = "single")]
        scenario: ScenarioArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        p: usize,
        /// Extra label columns used as features (multi only); sets the truth padding.
        #[arg(long, default_value_t = 0)]
        m: usize,
        /// Regressed label, counted from 0 (multi only); defaults to the last.
        #[arg(long)]
        label_index: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the true coefficients; defaults to `<out>.truth.csv`.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Run one mechanism on a data set and write the released matrix.
    Mech {
        #[arg(long)]
        alg: MechanismId,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = (-9.0f64).exp())]
        delta: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        r0: Option<usize>,
        #[arg(long)]
        k0: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum, default_value = "eps2")]
        ag_convention: ConventionArg,
        #[arg(long, value_enum, default_value = "analytic")]
        ag_scale: ScaleArg,
    },
    /// Solve a regression task from a (released) Gram matrix.
    Regress {
        #[arg(long)]
        gram: PathBuf,
        #[arg(long)]
        label: usize,
        /// Comma-separated feature column indices.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-regression experiment grid.
    ExpSingle {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, default_value_t = 0.5)]
        noise_sd: f64,
    },
    /// Multiple-regression experiment grid on correlated labels.
    ExpMulti {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long)]
        label_index: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        noise_sd: f64,
    },
    /// Monte Carlo checks of the supporting concentration results.
    Check {
        /// `all` or one check id.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Comma-separated sample sizes; scenario default grid when absent.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 15)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Comma-separated mechanism ids; scenario default list when absent.
    #[arg(long, value_delimiter = ',')]
    mechanisms: Option<Vec<MechanismId>>,
    #[arg(long)]
    r0: Option<usize>,
    #[arg(long, value_enum, default_value = "2d")]
    k0: K0Arg,
    /// Fixed rows for ridge-jl; by default it reuses the rows ridge-jl-adaptive chose.
    #[arg(long)]
    jl_rows: Option<usize>,
    #[arg(long, value_enum, default_value = "eps2")]
    ag_convention: ConventionArg,
    #[arg(long, value_enum, default_value = "analytic")]
    ag_scale: ScaleArg,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn convention(c: ConventionArg) -> AgConvention {
    match c {
        ConventionArg::Eps2 => AgConvention::EpsSquared,
        ConventionArg::Eps1 => AgConvention::EpsLinear,
    }
}

fn scale_mode(s: ScaleArg) -> AgScaleMode {
    match s {
        ScaleArg::Analytic => AgScaleMode::Analytic,
        ScaleArg::MonteCarlo => AgScaleMode::MonteCarlo,
    }
}

impl GridArgs {
    fn into_grid(self, mut grid: ExperimentGrid) -> (ExperimentGrid, PathBuf, Option<usize>) {
        if let Some(n) = self.n_list {
            grid.n_values = n;
        }
        if let Some(e) = self.eps_list {
            grid.epsilons = e;
        }
        if let Some(d) = self.delta {
            grid.delta = d;
        }
        if let Some(m) = self.mechanisms {
            grid.mechanisms = m;
        }
        grid.trials = self.trials;
        grid.master_seed = self.master_seed;
        grid.r0 = self.r0;
        grid.k0 = match self.k0 {
            K0Arg::TwiceDim => K0Choice::TwiceDim,
            K0Arg::RowsPlusDim => K0Choice::RowsPlusDim,
        };
        grid.jl_rows = self.jl_rows.map_or(JlRows::MatchAdaptive, JlRows::Fixed);
        grid.ag_convention = convention(self.ag_convention);
        grid.ag_scale_mode = scale_mode(self.ag_scale);
        (grid, self.out_dir, self.threads)
    }
}

fn experiment(grid: ExperimentGrid, scenario: Scenario, out_dir: &Path, threads: Option<usize>) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
    let summary = pool.install(|| run_experiment(&grid, &scenario, out_dir))?;
    for w in ordering_warnings(&summary) {
        eprintln!("warning: {w}");
    }
    let cells = summary.len();
    let failed: usize = summary.iter().map(|s| s.fail_count).sum();
    println!(
        "{cells} cells, {} trials ({failed} failed) written to {}",
        cells * grid.trials,
        out_dir.display()
    );
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            scenario,
            n,
            p,
            m,
            label_index,
            noise_sd,
            seed,
            out,
            truth_out,
        } => {
            let mut rng = RngStream::from_seed(seed);
            let (data, truth) = match scenario {
                ScenarioArg::Single => gen_single(&SingleRegressionConfig { p, noise_sd, ..SingleRegressionConfig::new(n) }, &mut rng)?,
                ScenarioArg::Multi => {
                    let config = MultiRegressionConfig {
                        p,
                        label_index: label_index.unwrap_or(p.saturating_sub(1)),
                        noise_sd,
                        ..MultiRegressionConfig::new(n, m)
                    };
                    gen_multi(&config, &mut rng)?
                }
            };
            io::write_dataset(&out, &data)?;
            let truth_path = truth_out.unwrap_or_else(|| {
                let mut s = out.clone().into_os_string();
                s.push(".truth.csv");
                PathBuf::from(s)
            });
            io::write_coefficients(&truth_path, &truth)?;
        }
        Command::Mech {
            alg,
            eps,
            delta,
            input,
            seed,
            out,
            r,
            r0,
            k0,
            rho,
            ag_convention,
            ag_scale,
        } => {
            let data = io::read_dataset(&input)?;
            let mut config = MechanismConfig::new(PrivacyBudget::new(eps, delta)?);
            config.r = r;
            config.r0_or_k0 = match alg {
                MechanismId::RidgeJlAdaptive => r0,
                MechanismId::InvWishartAdaptive => k0,
                _ => None,
            };
            config.rho = rho;
            config.ag_variance_convention = convention(ag_convention);
            config.ag_scale_constant_mode = scale_mode(ag_scale);
            let est = mechanisms::run(alg, &data, &config, &mut RngStream::from_seed(seed))
                .with_context(|| format!("running {alg}"))?;
            io::write_estimate(&out, &est)?;
        }
        Command::Regress {
            gram,
            label,
            features,
            out,
        } => {
            let est = io::read_estimate(&gram)?;
            if est.calibration.inverse {
                bail!("{} holds an inverse Gram matrix; regress needs AᵀA", gram.display());
            }
            let task = RegressionTask::new(label, features, est.matrix.dim())?;
            io::write_coefficients(&out, &solve_from_gram(&est.matrix, &task)?)?;
        }
        Command::ExpSingle { grid, p, noise_sd } => {
            let (grid, out_dir, threads) = grid.into_grid(ExperimentGrid::single_default());
            let scenario = Scenario::Single(SingleRegressionConfig { p, noise_sd, ..SingleRegressionConfig::new(0) });
            experiment(grid, scenario, &out_dir, threads)?;
        }
        Command::ExpMulti {
            grid,
            p,
            m,
            label_index,
            noise_sd,
        } => {
            let (grid, out_dir, threads) = grid.into_grid(ExperimentGrid::multi_default());
            let scenario = Scenario::Multi(MultiRegressionConfig {
                p,
                label_index: label_index.unwrap_or(p.saturating_sub(1)),
                noise_sd,
                ..MultiRegressionConfig::new(0, m)
            });
            experiment(grid, scenario, &out_dir, threads)?;
        }
        Command::Check { suite, seed } => {
            let reports = if suite == "all" {
                run_suite(seed)?
            } else if CHECK_IDS.contains(&suite.as_str()) {
                vec![run_check(&suite, seed)?]
            } else {
                bail!("unknown check '{suite}'; expected 'all' or one of {}", CHECK_IDS.join(", "));
            };
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "check_id,trials,violations,bound,slack,passed")?;
            for r in &reports {
                writeln!(out, "{},{},{},{:?},{:?},{}", r.check_id, r.trials, r.violations, r.bound, r.slack, r.passed)?;
            }
            if reports.iter().any(|r| !r.passed) {
                bail!("one or more checks failed");
            }
        }
    }
    Ok(())
}
