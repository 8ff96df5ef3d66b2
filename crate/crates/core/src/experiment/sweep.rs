use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{metrics_to_string, timing_path, timing_to_string, write_atomic, RunSpec};
use crate::error::{Error, Result};
use crate::marl::{run_training, TrainingLog};

/// Every run of the sweep, in a fixed order.
pub fn sweep_specs(config: &ExperimentConfig) -> Vec<RunSpec> {
    let sweep = &config.sweep;
    let mut specs = Vec::new();
    for &algorithm in &sweep.algorithms {
        for &platoon_size in &sweep.platoon_sizes {
            for &gap_m in &sweep.gaps_m {
                for &seed in &sweep.seeds {
                    specs.push(RunSpec {
                        algorithm,
                        seed,
                        gap_m,
                        platoon_size,
                    });
                }
            }
        }
    }
    specs
}

/// Train one sweep point.
pub fn run_spec(config: &ExperimentConfig, spec: &RunSpec) -> Result<TrainingLog> {
    let env = config.env_at(spec.gap_m, spec.platoon_size);
    run_training(spec.algorithm, &env, &config.train, &config.reward, spec.seed)
}

/// Train one sweep point and write its metrics (and timing sidecar) into `dir`.
pub fn run_to_file(config: &ExperimentConfig, spec: &RunSpec, dir: &Path) -> Result<PathBuf> {
    let log = run_spec(config, spec)?;
    if log.diagnostics.pessimism_violations > 0 {
        log::error!(
            "{}: {} target rows exceeded a twin bootstrap",
            spec.file_stem(),
            log.diagnostics.pessimism_violations
        );
    }
    let path = dir.join(spec.file_name());
    write_atomic(&path, &metrics_to_string(spec, config.env.num_platoons, &log.records))?;
    write_atomic(&timing_path(&path), &timing_to_string(&log.records))?;
    Ok(path)
}

#[derive(Debug)]
pub enum RunStatus {
    Written(PathBuf),
    /// The metrics file already existed and was left alone.
    Skipped(PathBuf),
    Failed(Error),
}

#[derive(Debug)]
pub struct SweepReport {
    pub runs: Vec<(RunSpec, RunStatus)>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &(RunSpec, RunStatus)> {
        self.runs.iter().filter(|(_, s)| matches!(s, RunStatus::Failed(_)))
    }

    /// Paths of every metrics file the sweep produced or found.
    pub fn metrics_paths(&self) -> Vec<PathBuf> {
        self.runs
            .iter()
            .filter_map(|(_, s)| match s {
                RunStatus::Written(p) | RunStatus::Skipped(p) => Some(p.clone()),
                RunStatus::Failed(_) => None,
            })
            .collect()
    }
}

/// Run every sweep point not already present in `config.output_dir`, using up
/// to `jobs` threads. A failing run is reported without stopping the others.
pub fn run_sweep(config: &ExperimentConfig, jobs: usize) -> Result<SweepReport> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let specs = sweep_specs(config);
    let runs = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let path = dir.join(spec.file_name());
                let status = if path.exists() {
                    log::info!("{} exists, skipping", path.display());
                    RunStatus::Skipped(path)
                } else {
                    log::info!("running {}", spec.file_stem());
                    match run_to_file(config, spec, dir) {
                        Ok(p) => RunStatus::Written(p),
                        Err(e) => {
                            log::error!("{}: {e}", spec.file_stem());
                            RunStatus::Failed(e)
                        }
                    }
                };
                (*spec, status)
            })
            .collect()
    });
    Ok(SweepReport { runs })
}
