//! Estimators and goodness-of-fit tests over replicate outputs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::trajectory::TrajectoryGrid;

/// Significance level of the distributional tests.
pub const TEST_LEVEL: f64 = 0.01;
/// Two-sided standard normal quantile at [`TEST_LEVEL`].
pub const Z_CRITICAL: f64 = 2.575_829_303_548_901;

/// Verdict of one check, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    #[serde(default)]
    pub p_value: Option<f64>,
    /// Reference value the statistic was compared with, if any.
    #[serde(default)]
    pub target: Option<f64>,
    pub passed: bool,
    pub sample_size: u64,
    pub tolerance: f64,
}

impl TestReport {
    /// Passes when `|statistic − target| ≤ tolerance`.
    pub fn closeness(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64, sample_size: u64) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            p_value: None,
            target: Some(target),
            passed: (statistic - target).abs() <= tolerance,
            sample_size,
            tolerance,
        }
    }
}

/// Scalars of one replicate; absent entries were not computed by the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateSummary {
    pub replicate: u64,
    /// Seed of the frequency realization, shared by all replicates of a
    /// quenched design. Absent when the realization was loaded from a file.
    pub realization: Option<u64>,
    pub n: u64,
    pub k: Option<u64>,
    /// `K_n / n^α`.
    pub k_scaled: Option<f64>,
    /// `W_n(1)`.
    pub w1: Option<f64>,
    /// `Y_n(1)`.
    pub y1: Option<f64>,
    /// `(K_n − n^α S_α) / n^{α/2}`.
    pub centered: Option<f64>,
    pub diversity: Option<f64>,
    pub weight: f64,
}

impl ReplicateSummary {
    pub fn new(replicate: u64, realization: Option<u64>, n: u64) -> Self {
        ReplicateSummary {
            replicate,
            realization,
            n,
            k: None,
            k_scaled: None,
            w1: None,
            y1: None,
            centered: None,
            diversity: None,
            weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.k_scaled, self.w1, self.y1, self.centered, self.diversity]
            .iter()
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Sample(format!("replicate {} has a non-finite value", self.replicate)));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::Sample(format!("replicate {} has weight {}", self.replicate, self.weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    /// Unbiased (`n − 1` or reliability-weighted) variance.
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    /// Kish effective sample size; equals `n` without weights.
    pub effective_n: f64,
}

impl Moments {
    /// Tolerance for a moment check: four standard errors or 10% of the
    /// target, whichever is looser.
    pub fn mean_tolerance(&self, target: f64) -> f64 {
        (4.0 * self.se_mean).max(0.1 * target.abs())
    }
}

/// Mean, variance and their standard errors, optionally self-normalized
/// importance weighted. Equal weights take the unweighted path.
pub fn moment_estimates(samples: &[f64], weights: Option<&[f64]>) -> Result<Moments> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Sample(format!("need at least two samples, got {n}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Sample("non-finite sample".into()));
    }
    match weights {
        Some(w) if w.len() != n => Err(Error::Sample("weights and samples differ in length".into())),
        Some(w) if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) => {
            Err(Error::Sample("weights must be positive".into()))
        }
        Some(w) if w.iter().any(|&x| x != w[0]) => Ok(weighted_moments(samples, w)),
        _ => Ok(unweighted_moments(samples)),
    }
}

fn unweighted_moments(x: &[f64]) -> Moments {
    let nf = x.len() as f64;
    let mean = math::pairwise_sum(x) / nf;
    let m2 = math::pairwise_sum_by(x, &|v| (v - mean) * (v - mean)) / nf;
    let m4 = math::pairwise_sum_by(x, &|v| {
        let d = (v - mean) * (v - mean);
        d * d
    }) / nf;
    let variance = m2 * nf / (nf - 1.0);
    Moments {
        n: x.len() as u64,
        mean,
        variance,
        se_mean: math::sqrt(variance / nf),
        se_variance: variance_se(m4, variance, nf),
        effective_n: nf,
    }
}

fn variance_se(m4: f64, variance: f64, n: f64) -> f64 {
    if n <= 3.0 {
        return f64::NAN;
    }
    math::sqrt(((m4 - variance * variance * (n - 3.0) / (n - 1.0)) / n).max(0.0))
}

fn weighted_moments(x: &[f64], w: &[f64]) -> Moments {
    let pairs: Vec<(f64, f64)> = x.iter().copied().zip(w.iter().copied()).collect();
    let sw = math::pairwise_sum(w);
    let sw2 = math::pairwise_sum_by(w, &|v| v * v);
    let mean = math::pairwise_sum_by(&pairs, &|(v, wt)| v * wt) / sw;
    let m2 = math::pairwise_sum_by(&pairs, &|(v, wt)| wt * (v - mean) * (v - mean)) / sw;
    let m4 = math::pairwise_sum_by(&pairs, &|(v, wt)| {
        let d = (v - mean) * (v - mean);
        wt * d * d
    }) / sw;
    let variance = m2 * sw / (sw - sw2 / sw);
    // delta method for the ratio estimator
    let se_mean = math::sqrt(math::pairwise_sum_by(&pairs, &|(v, wt)| wt * wt * (v - mean) * (v - mean))) / sw;
    let effective_n = sw * sw / sw2;
    Moments {
        n: x.len() as u64,
        mean,
        variance,
        se_mean,
        se_variance: variance_se(m4, variance, effective_n),
        effective_n,
    }
}

/// Kolmogorov distribution survival function `P(K > λ)`.
pub fn kolmogorov_pvalue(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K ≤ λ) = √(2π)/λ Σ exp(−(2k−1)² π² / (8λ²))
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += math::exp(-j * j * math::PI * math::PI / (8.0 * lambda * lambda));
        }
        (1.0 - math::sqrt(2.0 * math::PI) / lambda * cdf).clamp(0.0, 1.0)
    } else {
        let mut p = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = 2.0 * math::exp(-2.0 * kf * kf * lambda * lambda);
            p += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        p.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Sample size entering the asymptotic law.
    pub effective_n: f64,
}

impl KsResult {
    fn from_statistic(d: f64, ne: f64) -> Self {
        let root = math::sqrt(ne);
        KsResult {
            statistic: d,
            p_value: kolmogorov_pvalue((root + 0.12 + 0.11 / root) * d),
            effective_n: ne,
        }
    }

    /// Not rejected at [`TEST_LEVEL`].
    pub fn report(&self, name: impl Into<String>) -> TestReport {
        TestReport {
            name: name.into(),
            statistic: self.statistic,
            p_value: Some(self.p_value),
            target: None,
            passed: self.p_value > TEST_LEVEL,
            sample_size: math::floor(self.effective_n + 0.5) as u64,
            tolerance: TEST_LEVEL,
        }
    }
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Sample("empty sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Sample("NaN in sample".into()));
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let x = sorted(samples)?;
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult::from_statistic(d, n))
}

/// One-sample KS with a self-normalized weighted empirical CDF; the
/// asymptotic law uses the Kish effective sample size.
pub fn ks_one_sample_weighted(samples: &[f64], weights: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.len() != weights.len() || samples.is_empty() {
        return Err(Error::Sample("weights and samples differ in length".into()));
    }
    let mut pairs: Vec<(f64, f64)> = samples.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let sw: f64 = math::pairwise_sum(weights);
    let sw2: f64 = math::pairwise_sum_by(weights, &|w| w * w);
    let mut below = 0.0;
    let mut d = 0.0f64;
    for &(v, w) in &pairs {
        let f = cdf(v);
        let lo = below / sw;
        below += w;
        let hi = below / sw;
        d = d.max(hi - f).max(f - lo);
    }
    Ok(KsResult::from_statistic(d, sw * sw / sw2))
}

/// Two-sample KS; tied values are stepped over together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let x = sorted(a)?;
    let y = sorted(b)?;
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult::from_statistic(d, ne))
}

/// Centered normal CDF with the given variance.
pub fn normal_cdf_with_variance(variance: f64) -> impl Fn(f64) -> f64 {
    let sd = math::sqrt(variance);
    move |x| math::normal_cdf(x / sd)
}

/// Entrywise covariance across replicate trajectories with per-entry
/// standard errors, both row-major over grid pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovGrid {
    pub dim: usize,
    pub replicates: u64,
    pub cov: Vec<f64>,
    pub se: Vec<f64>,
}

impl CovGrid {
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        (self.cov[i * self.dim + j], self.se[i * self.dim + j])
    }
}

pub fn empirical_cov_grid(trajectories: &[TrajectoryGrid]) -> Result<CovGrid> {
    let r = trajectories.len();
    if r < 2 {
        return Err(Error::Sample("need at least two trajectories".into()));
    }
    let g = trajectories[0].values.len();
    if trajectories.iter().any(|t| t.values.len() != g) {
        return Err(Error::Sample("trajectories have different grids".into()));
    }
    let rf = r as f64;
    let means: Vec<f64> = (0..g)
        .map(|i| math::pairwise_sum_by(trajectories, &|t| t.values[i]) / rf)
        .collect();
    let mut cov = vec![0.0; g * g];
    let mut se = vec![0.0; g * g];
    let mut prods = vec![0.0; r];
    for i in 0..g {
        for j in 0..=i {
            for (p, t) in prods.iter_mut().zip(trajectories) {
                *p = (t.values[i] - means[i]) * (t.values[j] - means[j]);
            }
            let c = math::pairwise_sum(&prods) / (rf - 1.0);
            let pm = math::pairwise_sum(&prods) / rf;
            let pv = math::pairwise_sum_by(&prods, &|p| (p - pm) * (p - pm)) / (rf - 1.0);
            let e = math::sqrt(pv / rf);
            cov[i * g + j] = c;
            cov[j * g + i] = c;
            se[i * g + j] = e;
            se[j * g + i] = e;
        }
    }
    Ok(CovGrid {
        dim: g,
        replicates: r as u64,
        cov,
        se,
    })
}

/// Pearson correlation of `W / S^{1/2}` and `Y / S^{1/2}` across replicates,
/// tested against zero with `z = r √R` at [`TEST_LEVEL`].
pub fn independence_check(w: &[f64], y: &[f64], diversity: &[f64]) -> Result<TestReport> {
    independence_check_with_slack(w, y, diversity, 1.0)
}

/// As [`independence_check`], passing when `|r| ≤ slack · z_{0.995} / √R`.
pub fn independence_check_with_slack(
    w: &[f64],
    y: &[f64],
    diversity: &[f64],
    slack: f64,
) -> Result<TestReport> {
    if !(slack >= 1.0) {
        return Err(Error::Sample("slack must be at least 1".into()));
    }
    let r = w.len();
    if y.len() != r || diversity.len() != r {
        return Err(Error::Sample("inputs differ in length".into()));
    }
    if r < 3 {
        return Err(Error::Sample("need at least three replicates".into()));
    }
    if diversity.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Sample("diversity must be positive".into()));
    }
    let a: Vec<f64> = w.iter().zip(diversity).map(|(x, s)| x / math::sqrt(*s)).collect();
    let b: Vec<f64> = y.iter().zip(diversity).map(|(x, s)| x / math::sqrt(*s)).collect();
    let corr = pearson(&a, &b);
    let rf = r as f64;
    let z = corr * math::sqrt(rf);
    let p = math::normal_two_sided(z);
    let tolerance = slack * Z_CRITICAL / math::sqrt(rf);
    Ok(TestReport {
        name: "independence".into(),
        statistic: corr,
        p_value: Some(p),
        target: Some(0.0),
        passed: corr.abs() <= tolerance,
        sample_size: r as u64,
        tolerance,
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = math::pairwise_sum(a) / n;
    let mb = math::pairwise_sum(b) / n;
    let pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    let sab = math::pairwise_sum_by(&pairs, &|(x, y)| (x - ma) * (y - mb));
    let saa = math::pairwise_sum_by(a, &|x| (x - ma) * (x - ma));
    let sbb = math::pairwise_sum_by(b, &|y| (y - mb) * (y - mb));
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / math::sqrt(saa * sbb)
}
