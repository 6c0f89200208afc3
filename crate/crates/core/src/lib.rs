//! Projected stochastic gradient descent with Polyak-Ruppert averaging for
//! parameters under linear-equality constraints `Bθ = b`, with online
//! covariance estimation, confidence intervals, and a streaming test of the
//! constraint itself.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and parallel experiment execution live in the `psgd` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod constraint;
pub mod dist;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod linalg;
pub mod models;
pub mod simulate;

pub use constraint::Constraint;
pub use error::{Error, Result};
pub use estimator::{EstimatorState, LearningRate};
pub use inference::{InferenceReport, Interval, SpecificationTest, TestResult};
pub use linalg::{Matrix, Vector};
pub use models::{BuiltinModel, CustomModel, LinearModel, LogisticModel, LossModel, MeanModel};
