//! The `estimate`, `spec-test` and `simulate` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use psgd_core::{
    BuiltinModel, Constraint, EstimatorState, InferenceReport, LearningRate, SpecificationTest,
};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config;
use crate::constraint_spec::ConstraintSpec;
use crate::data::{self, CsvSchema, Input, Labels, Layout};
use crate::error::{CliError, Result, EXIT_REJECT};
use crate::report;
use crate::runner::run_parallel;
use crate::snapshot::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Linear,
    Logistic,
    Mean,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::Mean => "mean",
        }
    }

    fn build(self, p: usize) -> psgd_core::Result<BuiltinModel> {
        match self {
            ModelKind::Linear => BuiltinModel::linear(p),
            ModelKind::Logistic => BuiltinModel::logistic(p),
            ModelKind::Mean => BuiltinModel::mean(p),
        }
    }

    fn labels(self) -> Labels {
        match self {
            ModelKind::Logistic => Labels::PlusMinusOne,
            _ => Labels::Raw,
        }
    }
}

/// Options shared by the data-driven commands.
#[derive(Debug, Clone, PartialEq)]
pub struct DataOptions {
    /// CSV path; `None` or `-` reads standard input.
    pub data: Option<PathBuf>,
    pub model: ModelKind,
    pub schema: Option<String>,
    pub standardize: bool,
    pub shuffle_seed: Option<u64>,
    pub gamma: f64,
    pub rho: f64,
    pub alpha: f64,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            data: None,
            model: ModelKind::Linear,
            schema: None,
            standardize: false,
            shuffle_seed: None,
            gamma: 1.0,
            rho: 0.505,
            alpha: 0.05,
        }
    }
}

/// What a command printed and the exit code it asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

struct Prepared {
    input: Input,
    layout: Layout,
    model: BuiltinModel,
}

fn prepare(opts: &DataOptions) -> Result<Prepared> {
    check_alpha(opts.alpha)?;
    let mut schema = match &opts.schema {
        Some(s) => CsvSchema::parse(s)?,
        None => CsvSchema::default(),
    };
    schema.standardize = opts.standardize;
    let input = Input::from_arg(opts.data.as_deref())?;
    let layout = data::resolve(&input, &schema, opts.model != ModelKind::Mean)?;
    let model = opts.model.build(layout.features.len())?;
    Ok(Prepared {
        input,
        layout,
        model,
    })
}

fn schedule(opts: &DataOptions) -> Result<LearningRate> {
    LearningRate::new(opts.gamma, opts.rho).map_err(|e| CliError::usage(e.to_string()))
}

/// Streams observations in file order, or in a seeded random order when
/// `shuffle_seed` is set (which loads the file into memory).
fn feed<F>(prep: &Prepared, opts: &DataOptions, mut f: F) -> Result<u64>
where
    F: FnMut(&[f64]) -> psgd_core::Result<()>,
{
    let standardizer = if prep.layout.standardize {
        Some(data::standardize_pass(&prep.input, &prep.layout)?)
    } else {
        None
    };
    let labels = opts.model.labels();
    let describe = prep.input.describe();
    let tag = |line: u64, e: psgd_core::Error| CliError::input(format!("{describe} line {line}: {e}"));
    match opts.shuffle_seed {
        None => data::for_each_observation(
            &prep.input,
            &prep.layout,
            standardizer.as_ref(),
            labels,
            |line, z| f(z).map_err(|e| tag(line, e)),
        ),
        Some(seed) => {
            let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
            data::for_each_observation(
                &prep.input,
                &prep.layout,
                standardizer.as_ref(),
                labels,
                |line, z| {
                    rows.push((line, z.to_vec()));
                    Ok(())
                },
            )?;
            rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            for (line, z) in &rows {
                f(z).map_err(|e| tag(*line, e))?;
            }
            Ok(rows.len() as u64)
        }
    }
}

fn describe_constraint(spec: &ConstraintSpec, c: &Constraint) -> String {
    if c.is_unconstrained() {
        "none".to_string()
    } else if spec.source.is_empty() {
        format!("{} rows of B (p - d = {})", spec.rows.len(), c.df())
    } else {
        format!("{} (p - d = {})", spec.source, c.df())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateOptions {
    pub constraint: Option<String>,
    pub output: Option<PathBuf>,
    pub save_state: Option<PathBuf>,
    pub resume: Option<PathBuf>,
}

pub fn estimate(opts: &DataOptions, est: &EstimateOptions) -> Result<Outcome> {
    let prep = prepare(opts)?;
    let names = prep.layout.feature_names.clone();
    let p = names.len();
    let (mut state, spec) = match &est.resume {
        Some(path) => {
            if est.constraint.is_some() {
                return Err(CliError::usage(
                    "--constraint cannot be combined with --resume; the snapshot carries its constraint",
                ));
            }
            let snap = Snapshot::load(path)?;
            if snap.model != opts.model.as_str() || snap.parameters.len() != p {
                return Err(CliError::input(format!(
                    "{}: snapshot is for a {} model with {} parameters, not {} with {p}",
                    path.display(),
                    snap.model,
                    snap.parameters.len(),
                    opts.model.as_str()
                )));
            }
            let state = snap.restore()?;
            let spec = ConstraintSpec {
                rows: snap.constraint.matrix.clone(),
                rhs: snap.constraint.rhs.clone(),
                source: String::new(),
            };
            (state, spec)
        }
        None => {
            let spec = ConstraintSpec::from_arg(est.constraint.as_deref().unwrap_or("none"), &names)?;
            let constraint = spec.build(p)?;
            let state = EstimatorState::init(&prep.model, constraint, schedule(opts)?, None)?;
            (state, spec)
        }
    };
    let rows = feed(&prep, opts, |z| state.step(&prep.model, z))?;
    let report = InferenceReport::from_state(&state, opts.alpha)?;

    let mut out = String::new();
    writeln!(
        out,
        "model {}, {} rows read, T = {}, constraint: {}",
        opts.model.as_str(),
        rows,
        state.t(),
        describe_constraint(&spec, state.constraint())
    )
    .unwrap();
    out.push('\n');
    out.push_str(&report::estimates_table(&report, &names));
    out.push_str("\n* p < 0.05   • p < 0.1\n");
    if let Some(path) = &est.output {
        std::fs::write(path, report::estimates_csv(&report, &names))
            .map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &est.save_state {
        Snapshot::capture(&state, opts.model.as_str(), &names).save(path)?;
    }
    Ok(Outcome {
        stdout: out,
        exit_code: 0,
    })
}

pub fn spec_test(opts: &DataOptions, constraint: &str, output: Option<&Path>) -> Result<Outcome> {
    let prep = prepare(opts)?;
    let names = prep.layout.feature_names.clone();
    let spec = ConstraintSpec::from_arg(constraint, &names)?;
    if spec.is_empty() {
        return Err(CliError::usage("spec-test needs a non-empty constraint"));
    }
    let constraint = spec.build(names.len())?;
    let mut test = SpecificationTest::new(&prep.model, constraint, schedule(opts)?, None)?;
    feed(&prep, opts, |z| test.observe(&prep.model, z))?;
    let result = test.result(opts.alpha)?;

    let mut out = String::new();
    writeln!(
        out,
        "H0: {}",
        describe_constraint(&spec, test.constrained().constraint())
    )
    .unwrap();
    out.push_str(&report::test_summary(&result, &names));
    if let Some(path) = output {
        std::fs::write(path, report::test_csv(&result)).map_err(|e| CliError::io(path, e))?;
    }
    Ok(Outcome {
        stdout: out,
        exit_code: if result.reject { EXIT_REJECT } else { 0 },
    })
}

/// Writes `rows` draws from a preset data-generating process as CSV with a
/// header `y,V1,…,Vp` (or `V1,…,Vp` for the mean preset).
pub fn generate(dgp: &str, rows: u64, seed: u64, r: f64) -> Result<String> {
    let pre = psgd_core::simulate::dgp::preset(dgp).ok_or_else(|| {
        CliError::usage(format!(
            "unknown preset '{dgp}'; choose from {}",
            psgd_core::simulate::dgp::PRESET_NAMES.join(", ")
        ))
    })?;
    let spec = pre.dgp.with_r(r);
    let theta = spec.theta();
    let p = spec.param_dim();
    let has_response = spec.obs_dim() > p;
    let mut header: Vec<String> = (1..=p).map(|i| format!("V{i}")).collect();
    if has_response {
        header.insert(0, "y".to_string());
    }
    let mut out = header.join(",");
    out.push('\n');
    let mut rng = psgd_core::simulate::dgp::replication_rng(seed, 0);
    let mut z = vec![0.0; spec.obs_dim()];
    for _ in 0..rows {
        spec.draw_with(&theta, &mut rng, &mut z);
        let line: Vec<String> = z.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulateOptions {
    pub config: String,
    pub output: Option<PathBuf>,
    pub full: bool,
    pub seed: Option<u64>,
}

/// Runs every experiment in the plan. The CSV goes to `--output` when given
/// (with a summary table on stdout), otherwise to stdout.
pub fn simulate(opts: &SimulateOptions) -> Result<Outcome> {
    let mut plan = config::load(&opts.config, opts.full)?;
    if let Some(seed) = opts.seed {
        for e in &mut plan.experiments {
            e.base_seed = seed;
        }
    }
    let mut csv = String::from(report::EXPERIMENT_HEADER);
    let mut summary = String::new();
    for experiment in &plan.experiments {
        let result = run_parallel(experiment)?;
        eprintln!(
            "{} / {}: {:.1} s",
            plan.name,
            result.dgp,
            result.wall_clock_secs.unwrap_or(0.0)
        );
        csv.push_str(&report::experiment_csv_rows(&result));
        summary.push_str(&report::experiment_summary(&result));
        summary.push('\n');
    }
    let stdout = match &opts.output {
        Some(path) => {
            std::fs::write(path, &csv).map_err(|e| CliError::io(path, e))?;
            summary
        }
        None => csv,
    };
    Ok(Outcome {
        stdout,
        exit_code: 0,
    })
}
