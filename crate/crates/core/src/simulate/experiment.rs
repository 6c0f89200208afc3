//! Monte Carlo experiments: estimation error, confidence-interval coverage,
//! and size/power of the specification test.
//!
//! Replication `k` always draws from [`replication_rng`]`(base_seed, k)`, and
//! every `T` in the grid is read off the same stream as a checkpoint, so a
//! replication's result depends only on `(config, k)`. Aggregation consumes
//! replications in index order; any executor that preserves that order
//! reproduces the serial aggregates bit for bit.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::dgp::{replication_rng, DgpSpec};
use crate::constraint::Constraint;
use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, LearningRate};
use crate::inference::{InferenceReport, SpecificationTest, TestResult};
use crate::models::LossModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    EstimationError,
    Coverage,
    SizePower,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::EstimationError => "estimation_error",
            Mode::Coverage => "coverage",
            Mode::SizePower => "size_power",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "estimation_error" => Some(Mode::EstimationError),
            "coverage" => Some(Mode::Coverage),
            "size_power" => Some(Mode::SizePower),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub constraint: Constraint,
    pub schedule: LearningRate,
    pub sample_sizes: Vec<u64>,
    pub replications: usize,
    pub alpha: f64,
    pub base_seed: u64,
    pub mode: Mode,
    /// Misspecification grid for size/power; other modes use `dgp.misspec_r`.
    pub r_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Data("replications must be at least 1"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes[0] == 0 {
            return Err(Error::Data("sample sizes must be positive"));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data("sample sizes must be strictly increasing"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain {
                name: "alpha",
                value: self.alpha,
                expected: "0 < alpha < 1",
            });
        }
        self.constraint.check_dim(self.dgp.param_dim())?;
        if self.mode == Mode::SizePower {
            if self.r_grid.is_empty() {
                return Err(Error::Data("size/power needs a non-empty r grid"));
            }
            if self.constraint.df() == 0 {
                return Err(Error::DegenerateTest);
            }
        }
        Ok(())
    }

    /// The r values the experiment iterates over.
    pub fn r_values(&self) -> Vec<f64> {
        match self.mode {
            Mode::SizePower => self.r_grid.clone(),
            _ => vec![self.dgp.misspec_r],
        }
    }

    fn max_t(&self) -> u64 {
        *self.sample_sizes.last().expect("validated non-empty")
    }

    fn tag(&self, k: usize, t: u64, e: Error) -> Error {
        Error::Replication {
            replication: k,
            seed: self.base_seed,
            sample_size: t,
            source: Box::new(e),
        }
    }
}

/// Feeds one replication's stream to `on_obs`, calling `at_checkpoint` after
/// each sample size in the grid.
fn drive<F, C>(config: &ExperimentConfig, r: f64, k: usize, mut on_obs: F, mut at_checkpoint: C) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<()>,
    C: FnMut(u64) -> Result<()>,
{
    let dgp = config.dgp.clone().with_r(r);
    let theta = dgp.theta();
    let mut rng = replication_rng(config.base_seed, k as u64);
    let mut z = vec![0.0; dgp.obs_dim()];
    let mut next = 0;
    for t in 1..=config.max_t() {
        dgp.draw_with(&theta, &mut rng, &mut z);
        on_obs(&z).map_err(|e| config.tag(k, t, e))?;
        if t == config.sample_sizes[next] {
            at_checkpoint(t).map_err(|e| config.tag(k, t, e))?;
            next += 1;
        }
    }
    Ok(())
}

/// Absolute errors of the constrained and unconstrained averages at one `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationOutcome {
    pub sample_size: u64,
    pub abs_err_p: Vec<f64>,
    pub abs_err_i: Vec<f64>,
}

pub fn replicate_estimation(config: &ExperimentConfig, k: usize) -> Result<Vec<EstimationOutcome>> {
    let model = config.dgp.model();
    let p = model.param_dim();
    let mut constrained =
        EstimatorState::init(&model, config.constraint.clone(), config.schedule, None)?;
    let mut unconstrained =
        EstimatorState::init(&model, Constraint::unconstrained(p), config.schedule, None)?;
    let truth = config.dgp.theta();
    let mut out = Vec::with_capacity(config.sample_sizes.len());
    // Two mutable borrows are needed across the closures; keep the states in
    // a cell-free pair and split the work.
    let states = core::cell::RefCell::new((&mut constrained, &mut unconstrained));
    drive(
        config,
        config.dgp.misspec_r,
        k,
        |z| {
            let mut s = states.borrow_mut();
            s.0.step(&model, z)?;
            s.1.step(&model, z)
        },
        |t| {
            let s = states.borrow();
            let err = |theta: &[f64]| -> Vec<f64> {
                theta.iter().zip(&truth).map(|(a, b)| (a - b).abs()).collect()
            };
            out.push(EstimationOutcome {
                sample_size: t,
                abs_err_p: err(s.0.theta_bar()),
                abs_err_i: err(s.1.theta_bar()),
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// Per-coordinate coverage indicators of the constrained estimator at one `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageOutcome {
    pub sample_size: u64,
    pub covered: Vec<bool>,
}

pub fn replicate_coverage(config: &ExperimentConfig, k: usize) -> Result<Vec<CoverageOutcome>> {
    let model = config.dgp.model();
    let state = core::cell::RefCell::new(EstimatorState::init(
        &model,
        config.constraint.clone(),
        config.schedule,
        None,
    )?);
    let truth = config.dgp.theta();
    let mut out = Vec::with_capacity(config.sample_sizes.len());
    drive(
        config,
        config.dgp.misspec_r,
        k,
        |z| state.borrow_mut().step(&model, z),
        |t| {
            let report = InferenceReport::from_state(&state.borrow(), config.alpha)?;
            let covered = report
                .per_target
                .iter()
                .zip(&truth)
                .map(|(iv, &th)| iv.lower <= th && th <= iv.upper)
                .collect();
            out.push(CoverageOutcome {
                sample_size: t,
                covered,
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// Specification-test results for one replication at misspecification `r`,
/// one per sample size.
pub fn replicate_size_power(config: &ExperimentConfig, r: f64, k: usize) -> Result<Vec<TestResult>> {
    let model = config.dgp.model();
    let test = core::cell::RefCell::new(SpecificationTest::new(
        &model,
        config.constraint.clone(),
        config.schedule,
        None,
    )?);
    let mut out = Vec::with_capacity(config.sample_sizes.len());
    drive(
        config,
        r,
        k,
        |z| test.borrow_mut().observe(&model, z),
        |_t| {
            out.push(test.borrow().result(config.alpha)?);
            Ok(())
        },
    )?;
    Ok(out)
}

/// One aggregated cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sample_size: u64,
    pub r: f64,
    /// `None` for whole-vector metrics such as rejection frequency.
    pub coordinate: Option<usize>,
    pub metric: &'static str,
    pub value: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub mode: Mode,
    pub dgp: String,
    pub base_seed: u64,
    pub replications: usize,
    pub rows: Vec<ResultRow>,
    /// Filled in by executors that can read a clock.
    pub wall_clock_secs: Option<f64>,
}

impl ExperimentResult {
    pub fn find(&self, sample_size: u64, r: f64, coordinate: Option<usize>, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|row| {
            row.sample_size == sample_size
                && row.r == r
                && row.coordinate == coordinate
                && row.metric == metric
        })
    }
}

/// Binomial Monte Carlo standard error `√(p̂(1 − p̂)/R)`.
pub fn binomial_stderr(p_hat: f64, replications: usize) -> f64 {
    libm::sqrt(p_hat * (1.0 - p_hat) / replications as f64)
}

/// Sample mean and its standard error (`n − 1` denominator).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

fn result_shell(config: &ExperimentConfig) -> ExperimentResult {
    ExperimentResult {
        mode: config.mode,
        dgp: config.dgp.name.clone(),
        base_seed: config.base_seed,
        replications: config.replications,
        rows: Vec::new(),
        wall_clock_secs: None,
    }
}

/// Mean absolute error per coordinate for both estimators.
pub fn aggregate_estimation(config: &ExperimentConfig, reps: &[Vec<EstimationOutcome>]) -> ExperimentResult {
    let mut result = result_shell(config);
    let p = config.dgp.param_dim();
    let r = config.dgp.misspec_r;
    for (ti, &t) in config.sample_sizes.iter().enumerate() {
        for j in 0..p {
            for (metric, pick) in [
                ("mae_constrained", 0usize),
                ("mae_unconstrained", 1usize),
            ] {
                let vals: Vec<f64> = reps
                    .iter()
                    .map(|rep| {
                        let o = &rep[ti];
                        if pick == 0 {
                            o.abs_err_p[j]
                        } else {
                            o.abs_err_i[j]
                        }
                    })
                    .collect();
                let (mean, se) = mean_and_stderr(&vals);
                result.rows.push(ResultRow {
                    sample_size: t,
                    r,
                    coordinate: Some(j),
                    metric,
                    value: mean,
                    mc_stderr: se,
                });
            }
        }
    }
    result
}

pub fn aggregate_coverage(config: &ExperimentConfig, reps: &[Vec<CoverageOutcome>]) -> ExperimentResult {
    let mut result = result_shell(config);
    let p = config.dgp.param_dim();
    let n = reps.len();
    for (ti, &t) in config.sample_sizes.iter().enumerate() {
        for j in 0..p {
            let hits = reps.iter().filter(|rep| rep[ti].covered[j]).count();
            let freq = hits as f64 / n as f64;
            result.rows.push(ResultRow {
                sample_size: t,
                r: config.dgp.misspec_r,
                coordinate: Some(j),
                metric: "coverage",
                value: freq,
                mc_stderr: binomial_stderr(freq, n),
            });
        }
    }
    result
}

/// `reps[ri][k]` holds replication `k` at `r_grid[ri]`.
pub fn aggregate_size_power(config: &ExperimentConfig, reps: &[Vec<Vec<TestResult>>]) -> ExperimentResult {
    let mut result = result_shell(config);
    for (ri, &r) in config.r_grid.iter().enumerate() {
        let n = reps[ri].len();
        for (ti, &t) in config.sample_sizes.iter().enumerate() {
            let rejections = reps[ri].iter().filter(|rep| rep[ti].reject).count();
            let freq = rejections as f64 / n as f64;
            result.rows.push(ResultRow {
                sample_size: t,
                r,
                coordinate: None,
                metric: "rejection",
                value: freq,
                mc_stderr: binomial_stderr(freq, n),
            });
        }
    }
    result
}

pub fn run_estimation_error(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let reps = (0..config.replications)
        .map(|k| replicate_estimation(config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_estimation(config, &reps))
}

pub fn run_coverage(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let reps = (0..config.replications)
        .map(|k| replicate_coverage(config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_coverage(config, &reps))
}

pub fn run_size_power(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let reps = config
        .r_grid
        .iter()
        .map(|&r| {
            (0..config.replications)
                .map(|k| replicate_size_power(config, r, k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_size_power(config, &reps))
}

/// Dispatches on `config.mode`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.mode {
        Mode::EstimationError => run_estimation_error(config),
        Mode::Coverage => run_coverage(config),
        Mode::SizePower => run_size_power(config),
    }
}
