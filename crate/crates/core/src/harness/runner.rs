use std::fs;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::{
    aggregate_file_name, run_file_name, write_aggregate_csv, write_manifest, write_run_csv,
    Manifest, RunEntry, CSV_SCHEMA_VERSION,
};
use super::stats::{band, smooth};
use super::HarnessError;
use crate::agent::{train_run, Algorithm, RunMetrics};

/// One finished (or failed) run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub outcome: Result<(RunMetrics, Vec<f64>), String>,
}

impl RunRecord {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        self.outcome.as_ref().ok().map(|(m, _)| m)
    }

    pub fn smoothed(&self) -> Option<&[f64]> {
        self.outcome.as_ref().ok().map(|(_, s)| s.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub oracle_optimum: f64,
    /// Ordered by algorithm, then seed, as listed in the config.
    pub runs: Vec<RunRecord>,
}

impl ExperimentResults {
    pub fn runs_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.algorithm == algorithm)
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn execute(
    config: &ExperimentConfig,
    algorithm: Algorithm,
    seed: u64,
) -> Result<(RunMetrics, Vec<f64>), HarnessError> {
    let metrics = train_run(&config.run_config(algorithm, seed), &config.grid, &config.probes)?;
    let smoothed = smooth(&metrics.returns, config.smoothing_window);
    let path = config.out_dir.join(run_file_name(algorithm, seed));
    write_run_csv(&path, &metrics, &smoothed, &config.probes)?;
    Ok((metrics, smoothed))
}

/// Trains every algorithm on every seed, then writes the aggregates and the
/// manifest. A failing run is recorded and does not stop the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults, HarnessError> {
    config.validate()?;
    let oracle_optimum = config.oracle()?;
    fs::create_dir_all(&config.out_dir)
        .map_err(|source| HarnessError::Io { path: config.out_dir.clone(), source })?;

    let started = Instant::now();
    let jobs: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(algorithm, seed)| RunRecord {
                algorithm,
                seed,
                outcome: execute(config, algorithm, seed).map_err(|e| e.to_string()),
            })
            .collect()
    });

    for &algorithm in &config.algorithms {
        let curves: Vec<Vec<f64>> = runs
            .iter()
            .filter(|r| r.algorithm == algorithm)
            .filter_map(|r| r.smoothed().map(<[f64]>::to_vec))
            .collect();
        if curves.is_empty() {
            continue;
        }
        let (mean, spread) = band(&curves);
        let std: Vec<f64> = spread.iter().map(|b| b * 10.0).collect();
        let path = config.out_dir.join(aggregate_file_name(algorithm));
        write_aggregate_csv(&path, &mean, &std, &spread)?;
    }

    let entries = runs
        .iter()
        .map(|r| match &r.outcome {
            Ok((m, s)) => RunEntry {
                algorithm: r.algorithm,
                seed: r.seed,
                status: "ok".into(),
                file: Some(run_file_name(r.algorithm, r.seed)),
                final_smoothed_return: s.last().copied(),
                wall_clock_secs: Some(m.wall_clock_secs),
                error: None,
            },
            Err(e) => RunEntry {
                algorithm: r.algorithm,
                seed: r.seed,
                status: "failed".into(),
                file: None,
                final_smoothed_return: None,
                wall_clock_secs: None,
                error: Some(e.clone()),
            },
        })
        .collect();
    let manifest = Manifest {
        csv_schema_version: CSV_SCHEMA_VERSION,
        experiment: config.experiment,
        oracle_optimum,
        algorithms: config.algorithms.clone(),
        seeds: config.seeds.clone(),
        smoothing_window: config.smoothing_window,
        jobs: config.jobs,
        total_wall_clock_secs: started.elapsed().as_secs_f64(),
        grid: config.grid.clone(),
        agent: config.agent.clone(),
        probes: config.probes.clone(),
        runs: entries,
    };
    write_manifest(&config.out_dir.join("manifest.toml"), &manifest)?;

    Ok(ExperimentResults { config: config.clone(), oracle_optimum, runs })
}
