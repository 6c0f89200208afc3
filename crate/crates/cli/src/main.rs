//! `psgd`: streaming constrained estimation, specification tests and Monte
//! Carlo experiments.
//!
//! Exit codes: 0 success (or the test fails to reject), 1 usage error,
//! 2 data error, 3 the specification test rejects.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psgd::commands::{self, DataOptions, EstimateOptions, ModelKind, SimulateOptions};
use psgd::CliError;

#[derive(Parser, Debug)]
#[command(name = "psgd", version, about = "Online inference for parameters under linear-equality constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate parameters and report standard errors, intervals and p-values.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        /// Constraint file, inline equations such as "V1=0, V9=0", or "none".
        #[arg(long, default_value = None)]
        constraint: Option<String>,
        /// Write the estimates as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Save the estimator state as JSON after the pass.
        #[arg(long)]
        save_state: Option<PathBuf>,
        /// Continue from a saved state instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Test whether the constraint holds.
    SpecTest {
        #[command(flatten)]
        data: DataArgs,
        /// Constraint file or inline equations.
        #[arg(long)]
        constraint: String,
        /// Write the test result as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment from a config file or bundled config.
    Simulate {
        /// Config path, or one of table_s1_desk, table_s2_desk, figure_s1_desk.
        config: String,
        /// Write the result CSV here; otherwise it goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Use the config's full-scale grid and replication count.
        #[arg(long)]
        full: bool,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write synthetic data from a preset data-generating process as CSV.
    Generate {
        /// dgp1_linear, dgp2_logistic, dgp2_logistic_power or mean.
        #[arg(long)]
        dgp: String,
        #[arg(long)]
        rows: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Misspecification shift.
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file; omit or pass "-" for stdin.
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelKind::Linear)]
    model: ModelKind,
    /// Columns as RESPONSE:F1,F2,... (names or 1-based positions).
    #[arg(long)]
    schema: Option<String>,
    /// Standardize features with a first pass over the data.
    #[arg(long)]
    standardize: bool,
    /// Process rows in a seeded random order.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.505)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl From<DataArgs> for DataOptions {
    fn from(a: DataArgs) -> Self {
        DataOptions {
            data: a.data,
            model: a.model,
            schema: a.schema,
            standardize: a.standardize,
            shuffle_seed: a.shuffle_seed,
            gamma: a.gamma,
            rho: a.rho,
            alpha: a.alpha,
        }
    }
}

fn dispatch(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::Estimate {
            data,
            constraint,
            output,
            save_state,
            resume,
        } => commands::estimate(
            &data.into(),
            &EstimateOptions {
                constraint,
                output,
                save_state,
                resume,
            },
        ),
        Command::SpecTest {
            data,
            constraint,
            output,
        } => commands::spec_test(&data.into(), &constraint, output.as_deref()),
        Command::Simulate {
            config,
            output,
            full,
            seed,
            threads,
        } => {
            let opts = SimulateOptions {
                config,
                output,
                full,
                seed,
            };
            match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::usage(e.to_string()))?
                    .install(|| commands::simulate(&opts)),
                None => commands::simulate(&opts),
            }
        }
        Command::Generate {
            dgp,
            rows,
            seed,
            r,
            output,
        } => {
            let csv = commands::generate(&dgp, rows, seed, r)?;
            match output {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| CliError::io(&path, e))?;
                    Ok(commands::Outcome {
                        stdout: String::new(),
                        exit_code: 0,
                    })
                }
                None => Ok(commands::Outcome {
                    stdout: csv,
                    exit_code: 0,
                }),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(outcome.stdout.as_bytes());
            let _ = stdout.flush();
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
