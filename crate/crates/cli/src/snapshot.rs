//! Estimator checkpoints as JSON.
//!
//! ```json
//! {
//!   "format": "psgd-state",
//!   "version": 1,
//!   "model": "linear",
//!   "parameters": ["V1", "V2"],
//!   "t": 1000,
//!   "theta": [..], "theta_bar": [..],
//!   "g_hat": [[..], [..]], "s_hat": [[..], [..]],
//!   "constraint": { "matrix": [[..]], "rhs": [..] },
//!   "schedule": { "gamma": 1.0, "rho": 0.505 }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so a state survives
//! save/load unchanged.

use std::path::Path;

use psgd_core::{Constraint, EstimatorState, LearningRate, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const FORMAT: &str = "psgd-state";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub gamma: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub parameters: Vec<String>,
    pub t: u64,
    pub theta: Vec<f64>,
    pub theta_bar: Vec<f64>,
    pub g_hat: Vec<Vec<f64>>,
    pub s_hat: Vec<Vec<f64>>,
    pub constraint: ConstraintRecord,
    pub schedule: ScheduleRecord,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], cols: usize) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::empty_rows(cols));
    }
    Ok(Matrix::from_rows(rows)?)
}

impl Snapshot {
    pub fn capture(state: &EstimatorState, model: &str, parameters: &[String]) -> Self {
        let c = state.constraint();
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            model: model.to_string(),
            parameters: parameters.to_vec(),
            t: state.t(),
            theta: state.theta().to_vec(),
            theta_bar: state.theta_bar().to_vec(),
            g_hat: rows(state.g_hat()),
            s_hat: rows(state.s_hat()),
            constraint: ConstraintRecord {
                matrix: rows(c.matrix()),
                rhs: c.rhs().to_vec(),
            },
            schedule: ScheduleRecord {
                gamma: state.schedule().gamma(),
                rho: state.schedule().rho(),
            },
        }
    }

    pub fn restore(&self) -> Result<EstimatorState> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(CliError::input(format!(
                "not a {FORMAT} v{VERSION} snapshot (found {} v{})",
                self.format, self.version
            )));
        }
        let p = self.theta.len();
        let c = &self.constraint;
        let constraint = if c.matrix.is_empty() {
            Constraint::unconstrained(p)
        } else {
            Constraint::new(matrix(&c.matrix, p)?, c.rhs.clone())?
        };
        let schedule = LearningRate::new(self.schedule.gamma, self.schedule.rho)?;
        Ok(EstimatorState::from_parts(
            self.t,
            self.theta.clone(),
            self.theta_bar.clone(),
            matrix(&self.g_hat, p)?,
            matrix(&self.s_hat, p)?,
            constraint,
            schedule,
        )?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("snapshot: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}
