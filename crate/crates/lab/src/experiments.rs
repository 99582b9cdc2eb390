//! The experiment kinds. Each is a pure function of its config; replicate
//! `r` draws from streams derived from `derive_seed(seed, r)`, so results do
//! not depend on thread count or on how replicates are split across runs.

use std::time::Instant;

use ewens_pitman_core::frequencies::{
    default_truncation, epsilon_schedule, expected_diversity, importance_weight, sample_gem,
    sample_pd_theta0, truncated_d, DEFAULT_TAIL_TOLERANCE,
};
use ewens_pitman_core::limits::{
    cov_b, cov_z1, cov_z2, factorize, CovKernel, GaussianPathSampler, KernelKind,
    IDENTITY_TOLERANCE,
};
use ewens_pitman_core::partitions::{sibuya_pmf, simulate_crp};
use ewens_pitman_core::rng::{self, derive_seed, rng_from_seed};
use ewens_pitman_core::stats::{
    empirical_cov_grid, independence_check_with_slack, ks_one_sample, ks_one_sample_weighted,
    ks_two_sample, moment_estimates, normal_cdf_with_variance, Moments, ReplicateSummary,
    TestReport,
};
use ewens_pitman_core::urn::{poissonized_run_with, poissonized_y_trajectory, sample_occupancy_with, GridMeans, UrnSampler};
use ewens_pitman_core::{
    CrpParams, Error as CoreError, FrequencyRealization, Grid, TrajectoryGrid, TrajectoryKind,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::io::{self, MomentRow, TrajectoryRecord};

/// Per-replicate random streams: `derive_seed(replicate_seed, stream)`.
pub mod streams {
    pub const REALIZATION: u64 = 0;
    pub const OCCUPANCY: u64 = 1;
    /// Dequantization of lattice-valued statistics before a KS test.
    pub const JITTER: u64 = 2;
    pub const CRP: u64 = 3;
    pub const GEM: u64 = 4;
}

/// Points at which functional covariances are checked.
pub const COVARIANCE_POINTS: [f64; 3] = [0.25, 0.5, 1.0];
/// Slack on the independence bound `2.58/√R`.
pub const INDEPENDENCE_SLACK: f64 = 1.5;
/// Sticks per replicate on the GEM route of the change-of-measure check.
pub const GEM_ROUTE_STICKS: usize = 1000;
/// Sample size and sup-norm bound of the time-change check are tied by
/// `bound = TIME_CHANGE_SDS / √n`.
pub const TIME_CHANGE_SDS: f64 = 5.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub reports: Vec<TestReport>,
    pub moments: Vec<MomentRow>,
    pub replicates: Vec<ReplicateSummary>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub realization: Option<FrequencyRealization>,
}

impl ExperimentOutput {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn report(&self, name: &str) -> Option<&TestReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

/// Seed of the `index`-th replicate counted from the start of the run.
pub fn replicate_seed(config: &ExperimentConfig, index: u64) -> u64 {
    derive_seed(config.seed, config.replicate_offset + index)
}

pub fn stream_seed(replicate_seed: u64, stream: u64) -> u64 {
    derive_seed(replicate_seed, stream)
}

/// Seed of the realization pinned by a quenched design.
pub fn pinned_realization_seed(master: u64) -> u64 {
    derive_seed(master, u64::MAX)
}

/// Default `J`: tail mass below `min(10⁻³, 1/n)`, so that on average at most
/// one of `n` draws lands in the reservoir cell.
pub fn auto_truncation(alpha: f64, n: u64) -> Result<usize> {
    Ok(default_truncation(alpha, DEFAULT_TAIL_TOLERANCE.min(1.0 / n as f64))?)
}

fn pd_truncation(config: &ExperimentConfig, n: u64) -> Result<usize> {
    match config.truncation {
        Some(j) => Ok(j),
        None => auto_truncation(config.alpha, n),
    }
}

/// `PD(α, 0)` by arrivals, otherwise sorted stick breaking.
fn sample_realization(alpha: f64, theta: f64, j: usize, seed: u64) -> Result<FrequencyRealization> {
    if theta == 0.0 {
        Ok(sample_pd_theta0(alpha, j, seed)?)
    } else {
        Ok(sample_gem(alpha, theta, j, seed)?.to_ordered()?)
    }
}

/// Moment check: four standard errors or 10% of the target, whichever is
/// looser.
fn moment_report(name: impl Into<String>, m: &Moments, target: f64) -> TestReport {
    TestReport::closeness(name, m.mean, target, m.mean_tolerance(target), m.n)
}

fn variance_report(name: impl Into<String>, m: &Moments, target: f64) -> TestReport {
    TestReport::closeness(name, m.variance, target, 0.1 * target.abs(), m.n)
}

struct Progress {
    enabled: bool,
    start: Instant,
}

impl Progress {
    fn new(enabled: bool) -> Self {
        Progress {
            enabled,
            start: Instant::now(),
        }
    }

    fn note(&self, message: impl AsRef<str>) {
        if self.enabled {
            eprintln!("[{:8.2}s] {}", self.start.elapsed().as_secs_f64(), message.as_ref());
        }
    }
}

pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    execute_with_progress(config, false)
}

pub fn execute_with_progress(config: &ExperimentConfig, progress: bool) -> Result<ExperimentOutput> {
    config.validate()?;
    let progress = Progress::new(progress);
    progress.note(format!("{} with {} replicates", config.kind, config.replicates));
    let out = match config.kind {
        ExperimentKind::KernelIdentity => kernel_identity(config, &progress),
        ExperimentKind::PoissonizationCoupling => poissonization_coupling(config, &progress),
        ExperimentKind::CrpLln => crp_lln(config, &progress),
        ExperimentKind::CltWQuenched => clt_w_quenched(config, &progress),
        ExperimentKind::CltY => clt_y(config, &progress),
        ExperimentKind::JointClt => joint_clt(config, &progress),
    }?;
    progress.note(format!(
        "done: {}/{} checks passed",
        out.reports.iter().filter(|r| r.passed).count(),
        out.reports.len()
    ));
    Ok(out)
}

fn replicate_indices(config: &ExperimentConfig) -> rayon::range::Iter<u64> {
    (0..config.replicates).into_par_iter()
}

fn k_scaled_trajectory(k_at: impl Fn(u64) -> u32, n: u64, alpha: f64, grid: &Grid) -> TrajectoryGrid {
    let scale = (n as f64).powf(alpha);
    TrajectoryGrid {
        kind: TrajectoryKind::KScaled,
        n,
        grid: grid.clone(),
        values: grid.floor_indices(n).iter().map(|&m| k_at(m) as f64 / scale).collect(),
    }
}

fn kernel_identity(config: &ExperimentConfig, progress: &Progress) -> Result<ExperimentOutput> {
    let alpha = config.alpha;
    let mut out = ExperimentOutput::default();
    let mut rng = rng_from_seed(config.seed);
    let mut points: Vec<f64> = (0..50).map(|_| 1.0 - rng::uniform(&mut rng)).collect();
    let mut max_dev = 0.0f64;
    for &s in &points {
        for &t in &points {
            max_dev = max_dev.max((cov_z1(s, t, alpha) + cov_z2(s, t, alpha) - cov_b(s, t, alpha)).abs());
        }
    }
    out.reports.push(TestReport::closeness(
        "kernel-identity",
        max_dev,
        0.0,
        IDENTITY_TOLERANCE,
        (points.len() * points.len()) as u64,
    ));

    points.sort_by(f64::total_cmp);
    points.dedup();
    let kinds = [
        (KernelKind::Z1, "z1"),
        (KernelKind::Z2, "z2"),
        (KernelKind::BTimeChange, "b"),
    ];
    for (kind, label) in kinds {
        let kernel = CovKernel::new(alpha, kind)?;
        let gram = kernel.gram(&points);
        let trace: f64 = (0..points.len()).map(|i| gram[i * points.len() + i]).sum();
        let report = match factorize(&gram, points.len()) {
            Ok(f) => TestReport::closeness(format!("psd-{label}"), f.jitter() / trace, 0.0, 1e-10, points.len() as u64),
            Err(_) => TestReport {
                name: format!("psd-{label}"),
                statistic: f64::MAX,
                p_value: None,
                target: Some(0.0),
                passed: false,
                sample_size: points.len() as u64,
                tolerance: 1e-10,
            },
        };
        out.reports.push(report);
    }
    progress.note("identity and factorization checks done");

    let grid = Grid::uniform(config.grid_size);
    let last = grid.len() - 1;
    for (kind, label) in kinds {
        let kernel = CovKernel::new(alpha, kind)?;
        let sampler = GaussianPathSampler::new(kernel, &grid)?;
        let paths: Vec<TrajectoryGrid> = replicate_indices(config)
            .map(|r| {
                let seed = stream_seed(replicate_seed(config, r), kind as u64);
                sampler.sample(&mut rng_from_seed(seed))
            })
            .collect();
        if paths.len() >= 4 {
            let terminal: Vec<f64> = paths.iter().map(|p| p.values[last]).collect();
            let m = moment_estimates(&terminal, None)?;
            let target = kernel.eval(1.0, 1.0);
            out.reports.push(TestReport::closeness(
                format!("gaussian-{label}-variance"),
                m.variance,
                target,
                (4.0 * m.se_variance).max(0.1 * target),
                m.n,
            ));
            out.moments.push(MomentRow::new(format!("gaussian-{label}-terminal"), 0, alpha, config.theta, &m));
            let cov = empirical_cov_grid(&paths)?;
            if let (Some(i), Some(j)) = (grid.position(0.5), grid.position(1.0)) {
                let (c, se) = cov.at(i, j);
                out.reports.push(TestReport::closeness(
                    format!("gaussian-{label}-cov-0.5-1"),
                    c,
                    kernel.eval(0.5, 1.0),
                    4.0 * se,
                    cov.replicates,
                ));
            }
        }
        if config.trajectories {
            out.trajectories.extend(paths.into_iter().enumerate().map(|(r, trajectory)| TrajectoryRecord {
                alpha,
                theta: config.theta,
                replicate: config.replicate_offset + r as u64,
                trajectory,
            }));
        }
        progress.note(format!("gaussian {label} paths done"));
    }
    Ok(out)
}

struct CouplingReplicate {
    summary: ReplicateSummary,
    mismatches: u64,
    coupled_terminal: u32,
    sup_error: f64,
    trajectories: Vec<TrajectoryGrid>,
}

fn poissonization_coupling(config: &ExperimentConfig, progress: &Progress) -> Result<ExperimentOutput> {
    let (alpha, theta) = (config.alpha, config.theta);
    let grid = Grid::uniform(config.grid_size);
    let pinned = match &config.realization {
        Some(path) => Some(io::read_realization(path)?),
        None => None,
    };
    let mut out = ExperimentOutput::default();
    for n in config.sample_sizes() {
        let j = match &pinned {
            Some(_) => 0,
            None => pd_truncation(config, n)?,
        };
        let reps: Vec<CouplingReplicate> = replicate_indices(config)
            .map(|r| -> Result<CouplingReplicate> {
                let rs = replicate_seed(config, r);
                let owned;
                let real = match &pinned {
                    Some(real) => real,
                    None => {
                        owned = sample_realization(alpha, theta, j, stream_seed(rs, streams::REALIZATION))?;
                        &owned
                    }
                };
                let sampler = UrnSampler::new(real);
                let occ_seed = stream_seed(rs, streams::OCCUPANCY);
                let occ = sample_occupancy_with(&sampler, n, &mut rng_from_seed(occ_seed))?;
                let run = poissonized_run_with(&sampler, n, &grid, occ_seed)?;
                let coupled = run.coupled_k();
                let direct: Vec<u32> = grid.floor_indices(n).iter().map(|&m| occ.k_at(m)).collect();
                let mismatches = coupled.iter().zip(&direct).filter(|(a, b)| a != b).count() as u64;
                let mut summary = ReplicateSummary::new(config.replicate_offset + r, pinned.is_none().then_some(stream_seed(rs, streams::REALIZATION)), n);
                summary.k = Some(occ.k_final() as u64);
                summary.k_scaled = Some(occ.k_final() as f64 / (n as f64).powf(alpha));
                summary.diversity = Some(real.diversity());
                let mut trajectories = Vec::new();
                if config.trajectories {
                    trajectories.push(k_scaled_trajectory(|m| occ.k_at(m), n, alpha, &grid));
                    trajectories.push(poissonized_y_trajectory(real, n, &grid));
                }
                Ok(CouplingReplicate {
                    summary,
                    mismatches,
                    coupled_terminal: *coupled.last().unwrap_or(&0),
                    sup_error: run.max_time_change_error(),
                    trajectories,
                })
            })
            .collect::<Result<_>>()?;
        let total = reps.len() as u64;
        let mismatches: u64 = reps.iter().map(|r| r.mismatches).sum();
        out.reports.push(TestReport::closeness("coupling-exact", mismatches as f64, 0.0, 0.0, total));
        let bound = TIME_CHANGE_SDS / (n as f64).sqrt();
        let within = reps.iter().filter(|r| r.sup_error <= bound).count() as f64 / total as f64;
        out.reports.push(TestReport::closeness("time-change", within, 1.0, 0.01, total));
        let k_direct: Vec<f64> = reps.iter().map(|r| r.summary.k.unwrap_or(0) as f64).collect();
        let k_coupled: Vec<f64> = reps.iter().map(|r| r.coupled_terminal as f64).collect();
        out.reports.push(ks_two_sample(&k_direct, &k_coupled)?.report("coupling-ks"));
        if total >= 2 {
            let sup: Vec<f64> = reps.iter().map(|r| r.sup_error).collect();
            out.moments.push(MomentRow::new("time-change-sup-error", n, alpha, theta, &moment_estimates(&sup, None)?));
            let ks: Vec<f64> = reps.iter().filter_map(|r| r.summary.k_scaled).collect();
            out.moments.push(MomentRow::new("k-scaled", n, alpha, theta, &moment_estimates(&ks, None)?));
        }
        for rep in reps {
            push_trajectories(&mut out, config, rep.summary.replicate, rep.trajectories);
            out.replicates.push(rep.summary);
        }
        progress.note(format!("n = {n}: {mismatches} coupling mismatches"));
    }
    Ok(out)
}

fn push_trajectories(out: &mut ExperimentOutput, config: &ExperimentConfig, replicate: u64, trajectories: Vec<TrajectoryGrid>) {
    out.trajectories.extend(trajectories.into_iter().map(|trajectory| TrajectoryRecord {
        alpha: config.alpha,
        theta: config.theta,
        replicate,
        trajectory,
    }));
}

const BLOCK_SIZES: [u64; 3] = [1, 2, 3];

struct CrpReplicate {
    summary: ReplicateSummary,
    fractions: [f64; 3],
    urn_k: u64,
    trajectory: Option<TrajectoryGrid>,
}

fn crp_lln(config: &ExperimentConfig, progress: &Progress) -> Result<ExperimentOutput> {
    let (alpha, theta) = (config.alpha, config.theta);
    let params = CrpParams::new(alpha, theta)?;
    let grid = Grid::uniform(config.grid_size);
    let mut out = ExperimentOutput::default();
    for n in config.sample_sizes() {
        let j = pd_truncation(config, n)?;
        let reps: Vec<CrpReplicate> = replicate_indices(config)
            .map(|r| -> Result<CrpReplicate> {
                let rs = replicate_seed(config, r);
                let crp = simulate_crp(n, params, stream_seed(rs, streams::CRP))?;
                let k = crp.k_final() as u64;
                let mut fractions = [0.0; 3];
                for (slot, &size) in fractions.iter_mut().zip(&BLOCK_SIZES) {
                    *slot = crp.size_count(size) as f64 / k as f64;
                }
                let real = sample_realization(alpha, theta, j, stream_seed(rs, streams::REALIZATION))?;
                let occ = sample_occupancy_with(&UrnSampler::new(&real), n, &mut rng_from_seed(stream_seed(rs, streams::OCCUPANCY)))?;
                let mut summary = ReplicateSummary::new(config.replicate_offset + r, None, n);
                summary.k = Some(k);
                summary.k_scaled = Some(k as f64 / (n as f64).powf(alpha));
                let trajectory = config
                    .trajectories
                    .then(|| k_scaled_trajectory(|m| crp.k_at(m), n, alpha, &grid));
                Ok(CrpReplicate {
                    summary,
                    fractions,
                    urn_k: occ.k_final() as u64,
                    trajectory,
                })
            })
            .collect::<Result<_>>()?;
        if reps.len() >= 2 {
            let ks: Vec<f64> = reps.iter().filter_map(|r| r.summary.k_scaled).collect();
            let m = moment_estimates(&ks, None)?;
            out.reports.push(moment_report("k-scaled-mean", &m, expected_diversity(alpha, theta)?));
            out.moments.push(MomentRow::new("k-scaled", n, alpha, theta, &m));
            for (i, &size) in BLOCK_SIZES.iter().enumerate() {
                let f: Vec<f64> = reps.iter().map(|r| r.fractions[i]).collect();
                let m = moment_estimates(&f, None)?;
                out.reports.push(moment_report(format!("block-fraction-{size}"), &m, sibuya_pmf(size, alpha)?));
                out.moments.push(MomentRow::new(format!("block-fraction-{size}"), n, alpha, theta, &m));
            }
            let crp_k: Vec<f64> = reps.iter().map(|r| r.summary.k.unwrap_or(0) as f64).collect();
            let urn_k: Vec<f64> = reps.iter().map(|r| r.urn_k as f64).collect();
            out.reports.push(ks_two_sample(&crp_k, &urn_k)?.report("crp-urn-ks"));
            let scale = (n as f64).powf(alpha);
            let urn_scaled: Vec<f64> = urn_k.iter().map(|k| k / scale).collect();
            out.moments.push(MomentRow::new("urn-k-scaled", n, alpha, theta, &moment_estimates(&urn_scaled, None)?));
        }
        for rep in reps {
            push_trajectories(&mut out, config, rep.summary.replicate, rep.trajectory.into_iter().collect());
            out.replicates.push(rep.summary);
        }
        progress.note(format!("n = {n} done"));
    }
    Ok(out)
}

fn pinned_realization(config: &ExperimentConfig) -> Result<(FrequencyRealization, Option<u64>)> {
    if let Some(path) = &config.realization {
        let real = io::read_realization(path)?;
        if real.alpha() != config.alpha || real.theta() != config.theta {
            return Err(crate::error::LabError::Config(format!(
                "realization has (alpha, theta) = ({}, {}), config has ({}, {})",
                real.alpha(),
                real.theta(),
                config.alpha,
                config.theta
            )));
        }
        return Ok((real, None));
    }
    let n_max = config.sample_sizes().into_iter().max().unwrap_or(1);
    let j = pd_truncation(config, n_max)?;
    let seed = pinned_realization_seed(config.seed);
    Ok((sample_realization(config.alpha, config.theta, j, seed)?, Some(seed)))
}

fn clt_w_quenched(config: &ExperimentConfig, progress: &Progress) -> Result<ExperimentOutput> {
    let (alpha, theta) = (config.alpha, config.theta);
    let grid = Grid::uniform(config.grid_size);
    let last = grid.len() - 1;
    let (real, real_id) = pinned_realization(config)?;
    let s = real.diversity();
    progress.note(format!("pinned realization: J = {}, S = {s}", real.truncation_level()));
    let sampler = UrnSampler::new(&real);
    let mut out = ExperimentOutput::default();
    for n in config.sample_sizes() {
        let means = GridMeans::new(&real, n, &grid);
        let scale = means.scale();
        let reps: Vec<(TrajectoryGrid, f64, u64)> = replicate_indices(config)
            .map(|r| -> Result<_> {
                let rs = replicate_seed(config, r);
                let occ = sample_occupancy_with(&sampler, n, &mut rng_from_seed(stream_seed(rs, streams::OCCUPANCY)))?;
                let w = means.w(&occ)?;
                let u = rng::uniform(&mut rng_from_seed(stream_seed(rs, streams::JITTER)));
                // K_n is integer valued; spread each atom uniformly over its lattice cell
                let jittered = w.values[last] + (u - 0.5) / scale;
                Ok((w, jittered, occ.k_final() as u64))
            })
            .collect::<Result<_>>()?;
        let w1: Vec<f64> = reps.iter().map(|(w, _, _)| w.values[last]).collect();
        let target = (2f64.powf(alpha) - 1.0) * s;
        if reps.len() >= 2 {
            let m = moment_estimates(&w1, None)?;
            out.reports.push(TestReport::closeness("w-mean", m.mean, 0.0, 4.0 * m.se_mean, m.n));
            out.reports.push(variance_report("w-variance", &m, target));
            out.moments.push(MomentRow::new("w1", n, alpha, theta, &m));
            let jittered: Vec<f64> = reps.iter().map(|(_, j, _)| *j).collect();
            out.reports.push(ks_one_sample(&jittered, normal_cdf_with_variance(target))?.report("w-ks"));
            let paths: Vec<TrajectoryGrid> = reps.iter().map(|(w, _, _)| w.clone()).collect();
            let cov = empirical_cov_grid(&paths)?;
            for (a, &s_pt) in COVARIANCE_POINTS.iter().enumerate() {
                for &t_pt in &COVARIANCE_POINTS[a..] {
                    if let (Some(i), Some(j)) = (grid.position(s_pt), grid.position(t_pt)) {
                        let (c, se) = cov.at(i, j);
                        out.reports.push(TestReport::closeness(
                            format!("w-cov-{s_pt}-{t_pt}"),
                            c,
                            s * cov_z1(s_pt, t_pt, alpha),
                            4.0 * se,
                            cov.replicates,
                        ));
                    }
                }
            }
        }
        for (r, (w, _, k)) in reps.into_iter().enumerate() {
            let replicate = config.replicate_offset + r as u64;
            let mut summary = ReplicateSummary::new(replicate, real_id, n);
            summary.k = Some(k);
            summary.k_scaled = Some(k as f64 / (n as f64).powf(alpha));
            summary.w1 = Some(w.values[last]);
            summary.diversity = Some(s);
            if config.trajectories {
                push_trajectories(&mut out, config, replicate, vec![w]);
            }
            out.replicates.push(summary);
        }
        if config.trajectories {
            push_trajectories(&mut out, config, 0, vec![means.y()]);
        }
        progress.note(format!("n = {n} done"));
    }
    out.realization = Some(real);
    Ok(out)
}

struct AnnealedReplicate {
    summary: ReplicateSummary,
    window_ratio: Option<f64>,
    trajectories: Vec<TrajectoryGrid>,
}

fn clt_y(config: &ExperimentConfig, progress: &Progress) -> Result<ExperimentOutput> {
    let (alpha, theta) = (config.alpha, config.theta);
    let grid = Grid::uniform(config.grid_size);
    let last = grid.len() - 1;
    let mut out = ExperimentOutput::default();
    for n in config.sample_sizes() {
        let j = pd_truncation(config, n)?;
        let epsilon = epsilon_schedule(n, config.epsilon_c)?;
        let reps: Vec<AnnealedReplicate> = replicate_indices(config)
            .map(|r| -> Result<AnnealedReplicate> {
                let rs = replicate_seed(config, r);
                let real_seed = stream_seed(rs, streams::REALIZATION);
                let real = sample_pd_theta0(alpha, j, real_seed)?;
                let s = real.diversity();
                let y = GridMeans::new(&real, n, &grid).y();
                let window_ratio = match truncated_d(&real, epsilon, n) {
                    Ok(d_n) => Some(d_n / real.d_const()),
                    Err(CoreError::EmptyWindow { .. }) => None,
                    Err(e) => return Err(e.into()),
                };
                let mut summary = ReplicateSummary::new(config.replicate_offset + r, Some(real_seed), n);
                summary.y1 = Some(y.values[last]);
                summary.diversity = Some(s);
                summary.weight = importance_weight(s, alpha, theta)?;
                let mut trajectories = Vec::new();
                if config.trajectories {
                    trajectories.push(poissonized_y_trajectory(&real, n, &grid));
                    trajectories.insert(0, y);
                }
                Ok(AnnealedReplicate {
                    summary,
                    window_ratio,
                    trajectories,
                })
            })
            .collect::<Result<_>>()?;
        if reps.len() >= 2 {
            let weights: Vec<f64> = reps.iter().map(|r| r.summary.weight).collect();
            let s: Vec<f64> = reps.iter().filter_map(|r| r.summary.diversity).collect();
            let y1: Vec<f64> = reps.iter().filter_map(|r| r.summary.y1).collect();
            let ms = moment_estimates(&s, Some(&weights))?;
            out.reports.push(moment_report("diversity-mean", &ms, expected_diversity(alpha, theta)?));
            out.moments.push(MomentRow::new("diversity", n, alpha, theta, &ms));
            let my = moment_estimates(&y1, Some(&weights))?;
            let kernel = 2.0 - 2f64.powf(alpha);
            out.reports.push(variance_report("y-variance", &my, kernel * ms.mean));
            out.moments.push(MomentRow::new("y1", n, alpha, theta, &my));
            let standardized: Vec<f64> = y1.iter().zip(&s).map(|(y, s)| y / s.sqrt()).collect();
            let ks = if theta == 0.0 {
                ks_one_sample(&standardized, normal_cdf_with_variance(kernel))?
            } else {
                ks_one_sample_weighted(&standardized, &weights, normal_cdf_with_variance(kernel))?
            };
            out.reports.push(ks.report("y-ks"));
            let ratios: Vec<f64> = reps.iter().filter_map(|r| r.window_ratio).collect();
            let below = ratios.iter().filter(|&&x| x < 1.0).count();
            out.reports.push(TestReport::closeness("window-dominates", below as f64, 0.0, 0.0, ratios.len() as u64));
            if ratios.len() >= 2 {
                out.moments.push(MomentRow::new("window-ratio", n, alpha, theta, &moment_estimates(&ratios, None)?));
            }
            if theta != 0.0 {
                out.reports.extend(change_of_measure(alpha, theta, &s, config, GEM_ROUTE_STICKS)?);
            }
        }
        for rep in reps {
            push_trajectories(&mut out, config, rep.summary.replicate, rep.trajectories);
            out.replicates.push(rep.summary);
        }
        progress.note(format!("n = {n} done"));
    }
    Ok(out)
}

fn joint_clt(config: &ExperimentConfig, progress: &Progress) -> Result<ExperimentOutput> {
    let (alpha, theta) = (config.alpha, config.theta);
    let grid = Grid::uniform(config.grid_size);
    let last = grid.len() - 1;
    let mut out = ExperimentOutput::default();
    for n in config.sample_sizes() {
        let j = pd_truncation(config, n)?;
        let n_alpha = (n as f64).powf(alpha);
        let reps: Vec<AnnealedReplicate> = replicate_indices(config)
            .map(|r| -> Result<AnnealedReplicate> {
                let rs = replicate_seed(config, r);
                let real_seed = stream_seed(rs, streams::REALIZATION);
                let real = sample_pd_theta0(alpha, j, real_seed)?;
                let s = real.diversity();
                let means = GridMeans::new(&real, n, &grid);
                let occ = sample_occupancy_with(&UrnSampler::new(&real), n, &mut rng_from_seed(stream_seed(rs, streams::OCCUPANCY)))?;
                let w = means.w(&occ)?;
                let y = means.y();
                let k = occ.k_final() as u64;
                let mut summary = ReplicateSummary::new(config.replicate_offset + r, Some(real_seed), n);
                summary.k = Some(k);
                summary.k_scaled = Some(k as f64 / n_alpha);
                summary.w1 = Some(w.values[last]);
                summary.y1 = Some(y.values[last]);
                summary.centered = Some((k as f64 - n_alpha * s) / means.scale());
                summary.diversity = Some(s);
                summary.weight = importance_weight(s, alpha, theta)?;
                let trajectories = if config.trajectories { vec![w, y] } else { Vec::new() };
                Ok(AnnealedReplicate {
                    summary,
                    window_ratio: None,
                    trajectories,
                })
            })
            .collect::<Result<_>>()?;
        let summaries: Vec<ReplicateSummary> = reps.iter().map(|r| r.summary.clone()).collect();
        out.reports.extend(joint_reports(&summaries, alpha, theta)?);
        if summaries.len() >= 2 {
            let weights: Vec<f64> = summaries.iter().map(|r| r.weight).collect();
            for (name, pick) in [
                ("w1", (|r: &ReplicateSummary| r.w1) as fn(&ReplicateSummary) -> Option<f64>),
                ("y1", |r| r.y1),
                ("centered", |r| r.centered),
                ("diversity", |r| r.diversity),
            ] {
                let v: Vec<f64> = summaries.iter().filter_map(pick).collect();
                out.moments.push(MomentRow::new(name, n, alpha, theta, &moment_estimates(&v, Some(&weights))?));
            }
        }
        for rep in reps {
            push_trajectories(&mut out, config, rep.summary.replicate, rep.trajectories);
            out.replicates.push(rep.summary);
        }
        progress.note(format!("n = {n} done"));
    }
    Ok(out)
}

/// Checks on joint replicates: the exact decomposition
/// `W_n(1) + Y_n(1) = (K_n − n^α S_α)/n^{α/2}`, the variance of the centered
/// count against `E[S_α]`, and independence of the standardized parts.
pub fn joint_reports(summaries: &[ReplicateSummary], alpha: f64, theta: f64) -> Result<Vec<TestReport>> {
    let mut reports = Vec::new();
    let triples: Vec<(f64, f64, f64, f64, f64)> = summaries
        .iter()
        .filter_map(|r| Some((r.w1?, r.y1?, r.centered?, r.diversity?, r.weight)))
        .collect();
    if triples.len() < 3 {
        return Ok(reports);
    }
    let max_dev = triples.iter().map(|(w, y, c, _, _)| (w + y - c).abs()).fold(0.0, f64::max);
    reports.push(TestReport::closeness("decomposition-identity", max_dev, 0.0, 1e-10, triples.len() as u64));
    let centered: Vec<f64> = triples.iter().map(|t| t.2).collect();
    let weights: Vec<f64> = triples.iter().map(|t| t.4).collect();
    let m = moment_estimates(&centered, Some(&weights))?;
    reports.push(variance_report("centered-variance", &m, expected_diversity(alpha, theta)?));
    // the weights depend on S_α only, and the standardized pair is
    // independent given S_α, so the unweighted test is valid for any θ
    let w: Vec<f64> = triples.iter().map(|t| t.0).collect();
    let y: Vec<f64> = triples.iter().map(|t| t.1).collect();
    let s: Vec<f64> = triples.iter().map(|t| t.3).collect();
    reports.push(independence_check_with_slack(&w, &y, &s, INDEPENDENCE_SLACK)?);
    Ok(reports)
}

/// Change of measure from `PD(α, 0)` to `PD(α, θ)`: the weights
/// `Q(S_α)` must average to one within three standard errors, and the
/// reweighted mean of `S_α` must agree with an independent stick-breaking
/// estimate within four combined standard errors.
pub fn change_of_measure(
    alpha: f64,
    theta: f64,
    base_diversities: &[f64],
    config: &ExperimentConfig,
    sticks: usize,
) -> Result<Vec<TestReport>> {
    let weights: Vec<f64> = base_diversities
        .iter()
        .map(|&s| importance_weight(s, alpha, theta))
        .collect::<Result<_, _>>()?;
    let mw = moment_estimates(&weights, None)?;
    let mut reports = vec![TestReport::closeness("weight-mean", mw.mean, 1.0, 3.0 * mw.se_mean, mw.n)];
    let reweighted = moment_estimates(base_diversities, Some(&weights))?;
    let gem: Vec<f64> = (0..base_diversities.len() as u64)
        .into_par_iter()
        .map(|r| {
            let seed = stream_seed(replicate_seed(config, r), streams::GEM);
            Ok(sample_gem(alpha, theta, sticks, seed)?.diversity_estimate())
        })
        .collect::<Result<_>>()?;
    let mg = moment_estimates(&gem, None)?;
    let combined = (reweighted.se_mean.powi(2) + mg.se_mean.powi(2)).sqrt();
    reports.push(TestReport::closeness(
        "reweighted-diversity-vs-gem",
        reweighted.mean,
        mg.mean,
        4.0 * combined,
        mw.n,
    ));
    Ok(reports)
}

/// Samples `replicates` `PD(α, 0)` diversities with `J` frequencies each and
/// runs [`change_of_measure`] against them.
pub fn change_of_measure_experiment(
    alpha: f64,
    theta: f64,
    replicates: u64,
    truncation: usize,
    seed: u64,
) -> Result<Vec<TestReport>> {
    let config = ExperimentConfig {
        kind: ExperimentKind::CltY,
        alpha,
        theta,
        n: crate::config::SampleSizes::One(16),
        replicates,
        replicate_offset: 0,
        truncation: Some(truncation),
        grid_size: 1,
        epsilon_c: 1.0,
        seed,
        output_dir: Default::default(),
        trajectories: false,
        realization: None,
    };
    config.validate()?;
    let s: Vec<f64> = replicate_indices(&config)
        .map(|r| {
            let seed = stream_seed(replicate_seed(&config, r), streams::REALIZATION);
            Ok(sample_pd_theta0(alpha, truncation, seed)?.diversity())
        })
        .collect::<Result<_>>()?;
    change_of_measure(alpha, theta, &s, &config, GEM_ROUTE_STICKS)
}
