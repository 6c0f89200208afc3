//! Experiment configuration files.
//!
//! Flat `key = value` lines; `#` starts a comment. Lists are comma
//! separated. Keys:
//!
//! | key                 | meaning                                              | default           |
//! |---------------------|------------------------------------------------------|-------------------|
//! | `mode`              | `estimation_error`, `coverage` or `size_power`       | required          |
//! | `dgp`               | one or more presets (see [`PRESET_NAMES`])           | required          |
//! | `sample_sizes`      | increasing list of `T`                               | required          |
//! | `replications`      | Monte Carlo replications per cell                    | required          |
//! | `alpha`             | test / interval level                                | `0.05`            |
//! | `seed`              | base seed                                            | `0`               |
//! | `gamma`, `rho`      | learning rate `γ t^(−ρ)`                             | `1`, `0.505`      |
//! | `r`                 | misspecification shift for the non-test modes        | `0`               |
//! | `r_grid`            | shifts for `size_power`                              | `0`               |
//! | `constraint`        | shorthand equations in `V1..Vp`; `;`-separated       | preset constraint |
//! | `full_sample_sizes` | `sample_sizes` under `--full`                        | `sample_sizes`    |
//! | `full_replications` | `replications` under `--full`                        | `replications`    |

use std::collections::BTreeMap;
use std::path::Path;

use psgd_core::simulate::dgp::{preset, PRESET_NAMES};
use psgd_core::simulate::experiment::{ExperimentConfig, Mode};
use psgd_core::{Constraint, LearningRate};

use crate::constraint_spec::ConstraintSpec;
use crate::error::{CliError, Result};

pub const VALID_KEYS: [&str; 14] = [
    "mode",
    "dgp",
    "sample_sizes",
    "replications",
    "alpha",
    "seed",
    "gamma",
    "rho",
    "r",
    "r_grid",
    "constraint",
    "full_sample_sizes",
    "full_replications",
    "name",
];

/// Configurations shipped with the binary.
pub const BUNDLED: [(&str, &str); 3] = [
    ("table_s1_desk", include_str!("../configs/table_s1_desk.conf")),
    ("table_s2_desk", include_str!("../configs/table_s2_desk.conf")),
    ("figure_s1_desk", include_str!("../configs/figure_s1_desk.conf")),
];

/// One experiment per data-generating process listed in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub name: String,
    pub experiments: Vec<ExperimentConfig>,
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::input(format!("config key '{key}' = '{value}': {why}"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            let v = v.trim().replace('_', "");
            v.parse::<T>().map_err(|_| bad(key, value, "cannot parse list entry"))
        })
        .collect()
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .replace('_', "")
        .parse::<T>()
        .map_err(|_| bad(key, value, "cannot parse value"))
}

/// Parses a configuration. With `full`, the `full_*` keys replace their
/// desk-scale counterparts.
pub fn parse(text: &str, name: &str, full: bool) -> Result<SimulationPlan> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::input(format!("config line {}: expected 'key = value'", i + 1))
        })?;
        let key = key.trim();
        if !VALID_KEYS.contains(&key) {
            return Err(CliError::input(format!(
                "config line {}: unknown key '{key}'; valid keys are: {}",
                i + 1,
                VALID_KEYS.join(", ")
            )));
        }
        if kv.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::input(format!("config line {}: duplicate key '{key}'", i + 1)));
        }
    }
    let required = |key: &str| -> Result<&String> {
        kv.get(key)
            .ok_or_else(|| CliError::input(format!("config is missing required key '{key}'")))
    };

    let mode_text = required("mode")?;
    let mode = Mode::parse(mode_text).ok_or_else(|| {
        bad("mode", mode_text, "expected estimation_error, coverage or size_power")
    })?;
    let sizes_key = if full && kv.contains_key("full_sample_sizes") {
        "full_sample_sizes"
    } else {
        "sample_sizes"
    };
    let sample_sizes: Vec<u64> = list(sizes_key, required(sizes_key)?)?;
    let reps_key = if full && kv.contains_key("full_replications") {
        "full_replications"
    } else {
        "replications"
    };
    let replications: usize = scalar(reps_key, required(reps_key)?)?;
    if replications == 0 {
        return Err(bad(reps_key, "0", "at least one replication is needed"));
    }
    let alpha: f64 = kv.get("alpha").map_or(Ok(0.05), |v| scalar("alpha", v))?;
    let base_seed: u64 = kv.get("seed").map_or(Ok(0), |v| scalar("seed", v))?;
    let gamma: f64 = kv.get("gamma").map_or(Ok(1.0), |v| scalar("gamma", v))?;
    let rho: f64 = kv.get("rho").map_or(Ok(0.505), |v| scalar("rho", v))?;
    let schedule = LearningRate::new(gamma, rho)?;
    let r: f64 = kv.get("r").map_or(Ok(0.0), |v| scalar("r", v))?;
    let r_grid: Vec<f64> = kv.get("r_grid").map_or(Ok(vec![0.0]), |v| list("r_grid", v))?;

    let dgps: Vec<&str> = required("dgp")?.split(',').map(str::trim).collect();
    let mut experiments = Vec::new();
    for d in dgps {
        let pre = preset(d).ok_or_else(|| {
            bad("dgp", d, &format!("unknown preset; choose from {}", PRESET_NAMES.join(", ")))
        })?;
        let p = pre.dgp.param_dim();
        let constraint = match kv.get("constraint") {
            Some(text) => {
                let names: Vec<String> = (1..=p).map(|i| format!("V{i}")).collect();
                ConstraintSpec::parse_shorthand(text, &names)?.build(p)?
            }
            None => Constraint::new(pre.constraint_matrix, pre.constraint_rhs)?,
        };
        let config = ExperimentConfig {
            dgp: pre.dgp.with_r(r),
            constraint,
            schedule,
            sample_sizes: sample_sizes.clone(),
            replications,
            alpha,
            base_seed,
            mode,
            r_grid: r_grid.clone(),
        };
        config.validate()?;
        experiments.push(config);
    }
    Ok(SimulationPlan {
        name: kv.get("name").cloned().unwrap_or_else(|| name.to_string()),
        experiments,
    })
}

/// Loads a bundled configuration by name, or a file by path.
pub fn load(arg: &str, full: bool) -> Result<SimulationPlan> {
    if let Some((name, text)) = BUNDLED.iter().find(|(n, _)| *n == arg) {
        return parse(text, name, full);
    }
    let path = Path::new(arg);
    if !path.is_file() {
        let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
        return Err(CliError::usage(format!(
            "'{arg}' is neither a config file nor a bundled config ({})",
            names.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config");
    parse(&text, stem, full).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
