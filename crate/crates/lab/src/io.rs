//! Output files and their parsers.
//!
//! - `trajectories.csv`: `kind,n,alpha,theta,replicate,t,value`
//! - `reports.jsonl`: one [`TestReport`] per line
//! - `moments.csv`: one [`MomentRow`] per line
//! - `replicates.csv`: one [`ReplicateSummary`] per line
//! - `metadata.json`: [`RunMetadata`]
//! - `realization.json`: the pinned [`FrequencyRealization`] of a quenched run

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ewens_pitman_core::stats::{Moments, ReplicateSummary, TestReport};
use ewens_pitman_core::{FrequencyRealization, Grid, TrajectoryGrid, TrajectoryKind};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const MOMENTS_FILE: &str = "moments.csv";
pub const REPLICATES_FILE: &str = "replicates.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const REALIZATION_FILE: &str = "realization.json";

/// One trajectory together with the labels of its CSV rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub alpha: f64,
    pub theta: f64,
    pub replicate: u64,
    pub trajectory: TrajectoryGrid,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    kind: String,
    n: u64,
    alpha: f64,
    theta: f64,
    replicate: u64,
    t: f64,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub name: String,
    pub n: u64,
    pub alpha: f64,
    pub theta: f64,
    pub replicates: u64,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub effective_n: f64,
}

impl MomentRow {
    pub fn new(name: impl Into<String>, n: u64, alpha: f64, theta: f64, m: &Moments) -> Self {
        MomentRow {
            name: name.into(),
            n,
            alpha,
            theta,
            replicates: m.n,
            mean: m.mean,
            variance: m.variance,
            se_mean: m.se_mean,
            se_variance: m.se_variance,
            effective_n: m.effective_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub version: String,
    pub generator: String,
    pub normal_method: String,
    pub seed_derivation: String,
    pub categorical_method: String,
    pub files: Vec<String>,
}

impl RunMetadata {
    pub fn new(config: &ExperimentConfig, files: Vec<String>) -> Self {
        RunMetadata {
            config: config.clone(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            generator: ewens_pitman_core::rng::GENERATOR.to_string(),
            normal_method: ewens_pitman_core::rng::NORMAL_METHOD.to_string(),
            seed_derivation: "splitmix64-finalizer(splitmix64-finalizer(seed) + (replicate + 1) * 0x9e3779b97f4a7c15)"
                .to_string(),
            categorical_method: "cumulative-binary-search".to_string(),
            files,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| LabError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::Reader::from_path(path).map_err(|e| LabError::format(path, e))
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn write_trajectories(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    write_trajectories_to(create(path)?, path, records)
}

/// As [`write_trajectories`]; `label` names the destination in errors.
pub fn write_trajectories_to<W: Write>(writer: W, label: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let path = label;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
    for rec in records {
        let traj = &rec.trajectory;
        for (&t, &value) in traj.grid.points().iter().zip(&traj.values) {
            w.serialize(TrajectoryRow {
                kind: traj.kind.as_str().to_string(),
                n: traj.n,
                alpha: rec.alpha,
                theta: rec.theta,
                replicate: rec.replicate,
                t,
                value,
            })
            .map_err(|e| LabError::format(path, e))?;
        }
    }
    finish(path, w)
}

/// Consecutive rows sharing `(kind, n, alpha, theta, replicate)` form one
/// trajectory.
pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let mut rdr = csv_reader(path)?;
    let mut out: Vec<TrajectoryRecord> = Vec::new();
    let mut points: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut current: Option<(TrajectoryKind, u64, f64, f64, u64)> = None;
    let flush = |current: &Option<(TrajectoryKind, u64, f64, f64, u64)>,
                 points: &mut Vec<f64>,
                 values: &mut Vec<f64>,
                 out: &mut Vec<TrajectoryRecord>|
     -> Result<()> {
        if let Some((kind, n, alpha, theta, replicate)) = *current {
            let grid = Grid::new(std::mem::take(points)).map_err(|e| LabError::format(path, e))?;
            out.push(TrajectoryRecord {
                alpha,
                theta,
                replicate,
                trajectory: TrajectoryGrid {
                    kind,
                    n,
                    grid,
                    values: std::mem::take(values),
                },
            });
        }
        Ok(())
    };
    for row in rdr.deserialize::<TrajectoryRow>() {
        let row = row.map_err(|e| LabError::format(path, e))?;
        let kind = TrajectoryKind::parse(&row.kind)
            .ok_or_else(|| LabError::format(path, format!("unknown trajectory kind `{}`", row.kind)))?;
        let key = (kind, row.n, row.alpha, row.theta, row.replicate);
        if current != Some(key) {
            flush(&current, &mut points, &mut values, &mut out)?;
            current = Some(key);
        }
        points.push(row.t);
        values.push(row.value);
    }
    flush(&current, &mut points, &mut values, &mut out)?;
    Ok(out)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| LabError::format(path, e))?;
    }
    finish(path, w)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    csv_reader(path)?
        .deserialize()
        .map(|r| r.map_err(|e| LabError::format(path, e)))
        .collect()
}

pub fn write_moments(path: &Path, rows: &[MomentRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_moments(path: &Path) -> Result<Vec<MomentRow>> {
    read_rows(path)
}

pub fn write_replicates(path: &Path, rows: &[ReplicateSummary]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_replicates(path: &Path) -> Result<Vec<ReplicateSummary>> {
    let rows: Vec<ReplicateSummary> = read_rows(path)?;
    for r in &rows {
        r.validate().map_err(|e| LabError::format(path, e))?;
    }
    Ok(rows)
}

pub fn write_reports(path: &Path, reports: &[TestReport]) -> Result<()> {
    let mut w = create(path)?;
    for r in reports {
        let line = serde_json::to_string(r).map_err(|e| LabError::format(path, e))?;
        writeln!(w, "{line}").map_err(|e| LabError::io(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_reports(path: &Path) -> Result<Vec<TestReport>> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| LabError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let report: TestReport = serde_json::from_str(&line).map_err(|e| LabError::format(path, e))?;
        if report.p_value.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return Err(LabError::format(path, format!("p-value out of range in `{}`", report.name)));
        }
        out.push(report);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| LabError::format(path, e))?;
    writeln!(w).map_err(|e| LabError::io(path, e))?;
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| LabError::format(path, e))
}

pub fn read_metadata(path: &Path) -> Result<RunMetadata> {
    read_json(path)
}

pub fn read_realization(path: &Path) -> Result<FrequencyRealization> {
    read_json(path)
}
