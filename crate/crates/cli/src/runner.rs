//! Parallel experiment execution.
//!
//! Replications fan out over the rayon pool; results are collected in
//! replication order and handed to the same aggregation as the serial
//! runner in `psgd_core`, so both produce identical numbers.

use std::time::Instant;

use psgd_core::simulate::experiment::{
    aggregate_coverage, aggregate_estimation, aggregate_size_power, replicate_coverage,
    replicate_estimation, replicate_size_power, ExperimentConfig, ExperimentResult, Mode,
};
use rayon::prelude::*;

pub fn run_parallel(config: &ExperimentConfig) -> psgd_core::Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let reps = 0..config.replications;
    let mut result = match config.mode {
        Mode::EstimationError => {
            let out = reps
                .into_par_iter()
                .map(|k| replicate_estimation(config, k))
                .collect::<psgd_core::Result<Vec<_>>>()?;
            aggregate_estimation(config, &out)
        }
        Mode::Coverage => {
            let out = reps
                .into_par_iter()
                .map(|k| replicate_coverage(config, k))
                .collect::<psgd_core::Result<Vec<_>>>()?;
            aggregate_coverage(config, &out)
        }
        Mode::SizePower => {
            let cells: Vec<(usize, usize)> = (0..config.r_grid.len())
                .flat_map(|ri| reps.clone().map(move |k| (ri, k)))
                .collect();
            let flat = cells
                .into_par_iter()
                .map(|(ri, k)| replicate_size_power(config, config.r_grid[ri], k))
                .collect::<psgd_core::Result<Vec<_>>>()?;
            let per_r: Vec<Vec<_>> = flat
                .chunks(config.replications)
                .map(|c| c.to_vec())
                .collect();
            aggregate_size_power(config, &per_r)
        }
    };
    result.wall_clock_secs = Some(start.elapsed().as_secs_f64());
    Ok(result)
}
