use alloc::vec::Vec;

use thiserror::Error;

/// Errors raised by the estimation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error(
        "requested rank {requested} exceeds numerical rank: eigenvalue {eigenvalue:e} \
         is below floor {floor:e} (previous eigenvalue {previous:e})"
    )]
    RankDeficient {
        requested: usize,
        eigenvalue: f64,
        previous: f64,
        floor: f64,
    },

    #[error("matrix rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("constraint system is inconsistent (residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid data: {0}")]
    Data(&'static str),

    #[error("non-finite gradient or Hessian at step {t} (theta = {theta:?})")]
    StepNumerical { t: u64, theta: Vec<f64> },

    #[error("observation {index}: {source}")]
    AtObservation {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("replication {replication} (seed {seed}, T = {sample_size}): {source}")]
    Replication {
        replication: usize,
        seed: u64,
        sample_size: u64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("parameters not identified: {0}")]
    NotIdentified(&'static str),

    #[error("degenerate test: the constraint removes no degrees of freedom")]
    DegenerateTest,

    #[error("negative variance {0:e} beyond rounding tolerance")]
    NegativeVariance(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
