//! Experiment runner for Ewens–Pitman partitions: configuration, parallel
//! replicate orchestration and output files.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ExperimentKind, SampleSizes};
pub use error::{LabError, Result};
pub use experiments::{execute, execute_with_progress, ExperimentOutput};

/// Printed on standard output after a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub checks: usize,
    pub failed: Vec<String>,
    pub passed: bool,
}

/// Runs an experiment and writes its artifacts to `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig, progress: bool) -> Result<(RunSummary, ExperimentOutput)> {
    let out = execute_with_progress(config, progress)?;
    write_outputs(config, &out)?;
    let failed: Vec<String> = out.reports.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    let summary = RunSummary {
        experiment: config.kind,
        output_dir: config.output_dir.clone(),
        checks: out.reports.len(),
        passed: failed.is_empty(),
        failed,
    };
    Ok((summary, out))
}

pub fn write_outputs(config: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut files = Vec::new();
    let mut path = |name: &str| -> PathBuf {
        files.push(name.to_string());
        dir.join(name)
    };
    io::write_reports(&path(io::REPORTS_FILE), &out.reports)?;
    io::write_moments(&path(io::MOMENTS_FILE), &out.moments)?;
    io::write_replicates(&path(io::REPLICATES_FILE), &out.replicates)?;
    if config.trajectories {
        io::write_trajectories(&path(io::TRAJECTORIES_FILE), &out.trajectories)?;
    }
    if let Some(real) = &out.realization {
        io::write_json(&path(io::REALIZATION_FILE), real)?;
    }
    let metadata = io::RunMetadata::new(config, files);
    io::write_json(&dir.join(io::METADATA_FILE), &metadata)
}

/// Re-runs the configuration recorded in a metadata file, optionally into
/// another directory.
pub fn replay(metadata: &Path, output_dir: Option<PathBuf>, progress: bool) -> Result<(RunSummary, ExperimentOutput)> {
    let meta = io::read_metadata(metadata)?;
    let mut config = meta.config;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    run_experiment(&config, progress)
}
