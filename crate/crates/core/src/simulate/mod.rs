//! Data-generating processes and Monte Carlo experiments.

pub mod dgp;
pub mod experiment;

pub use dgp::{preset, replication_rng, DgpKind, DgpSpec, Preset, PRESET_NAMES};
pub use experiment::{
    aggregate_coverage, aggregate_estimation, aggregate_size_power, replicate_coverage,
    replicate_estimation, replicate_size_power, run, run_coverage, run_estimation_error,
    run_size_power, CoverageOutcome, EstimationOutcome, ExperimentConfig, ExperimentResult, Mode,
    ResultRow,
};
