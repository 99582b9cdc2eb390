//! Covariance kernels of the limit processes and Gaussian path simulation.
//!
//! * `Z1`: `(s+t)^α − max(s^α, t^α)`
//! * `Z2`: `s^α + t^α − (s+t)^α`
//! * `B`:  `min(s, t)^α`, the time-changed Brownian motion `B_{t^α}`
//!
//! Independent `Z1` and `Z2` add up to `B` in law.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::partitions::check_alpha;
use crate::rng;
use crate::trajectory::{Grid, TrajectoryGrid, TrajectoryKind};

pub fn cov_z1(s: f64, t: f64, alpha: f64) -> f64 {
    let sa = math::pow(s, alpha);
    let ta = math::pow(t, alpha);
    math::pow(s + t, alpha) - sa.max(ta)
}

pub fn cov_z2(s: f64, t: f64, alpha: f64) -> f64 {
    math::pow(s, alpha) + math::pow(t, alpha) - math::pow(s + t, alpha)
}

pub fn cov_b(s: f64, t: f64, alpha: f64) -> f64 {
    math::pow(s.min(t), alpha)
}

/// Tolerance of [`cov_sum_identity`].
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// `cov_z1 + cov_z2`, checked against `min(s, t)^α`.
pub fn cov_sum_identity(s: f64, t: f64, alpha: f64) -> Result<f64> {
    let sum = cov_z1(s, t, alpha) + cov_z2(s, t, alpha);
    let deviation = (sum - cov_b(s, t, alpha)).abs();
    if deviation > IDENTITY_TOLERANCE {
        return Err(Error::Identity { s, t, deviation });
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Z1,
    Z2,
    BTimeChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovKernel {
    pub alpha: f64,
    pub kind: KernelKind,
}

impl CovKernel {
    pub fn new(alpha: f64, kind: KernelKind) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(CovKernel { alpha, kind })
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match self.kind {
            KernelKind::Z1 => cov_z1(s, t, self.alpha),
            KernelKind::Z2 => cov_z2(s, t, self.alpha),
            KernelKind::BTimeChange => cov_b(s, t, self.alpha),
        }
    }

    pub fn trajectory_kind(&self) -> TrajectoryKind {
        match self.kind {
            KernelKind::Z1 => TrajectoryKind::GaussianZ1,
            KernelKind::Z2 => TrajectoryKind::GaussianZ2,
            KernelKind::BTimeChange => TrajectoryKind::GaussianB,
        }
    }

    /// Gram matrix over `points`, row-major.
    pub fn gram(&self, points: &[f64]) -> Vec<f64> {
        let g = points.len();
        let mut m = vec![0.0; g * g];
        for i in 0..g {
            for j in 0..=i {
                let v = self.eval(points[i], points[j]);
                m[i * g + j] = v;
                m[j * g + i] = v;
            }
        }
        m
    }
}

/// Lower Cholesky factor with the diagonal jitter that made it succeed.
#[derive(Debug, Clone)]
pub struct Factor {
    dim: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `L z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let g = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(g) {
            let row = &self.lower[i * g..i * g + i + 1];
            *o = row.iter().zip(z).map(|(l, x)| l * x).sum();
        }
    }
}

fn cholesky_in_place(a: &mut [f64], g: usize) -> core::result::Result<(), usize> {
    for j in 0..g {
        let mut d = a[j * g + j];
        for k in 0..j {
            d -= a[j * g + k] * a[j * g + k];
        }
        if !(d > 0.0) {
            return Err(j);
        }
        let d = math::sqrt(d);
        a[j * g + j] = d;
        for i in j + 1..g {
            let mut v = a[i * g + j];
            for k in 0..j {
                v -= a[i * g + k] * a[j * g + k];
            }
            a[i * g + j] = v / d;
        }
        for i in 0..j {
            a[i * g + j] = 0.0;
        }
    }
    Ok(())
}

/// Factorizes a symmetric PSD matrix, adding `δ I` with `δ` starting at
/// `1e-14 · trace / g` and growing tenfold until it reaches `1e-10 · trace`.
pub fn factorize(matrix: &[f64], g: usize) -> Result<Factor> {
    assert_eq!(matrix.len(), g * g, "matrix shape");
    let trace: f64 = (0..g).map(|i| matrix[i * g + i]).sum();
    let max_jitter = 1e-10 * trace;
    let mut jitter = 1e-14 * trace / g as f64;
    loop {
        let mut a = matrix.to_vec();
        for i in 0..g {
            a[i * g + i] += jitter;
        }
        match cholesky_in_place(&mut a, g) {
            Ok(()) => {
                return Ok(Factor {
                    dim: g,
                    lower: a,
                    jitter,
                })
            }
            Err(pivot) => {
                if jitter * 10.0 > max_jitter * (1.0 + 1e-12) {
                    return Err(Error::Factorization { pivot, jitter });
                }
                jitter *= 10.0;
            }
        }
    }
}

/// Samples a kernel's centered Gaussian vector on a grid. The factor is
/// computed once; `t = 0` points are fixed at zero and left out of it.
#[derive(Debug, Clone)]
pub struct GaussianPathSampler {
    kernel: CovKernel,
    grid: Grid,
    positive: Vec<usize>,
    factor: Factor,
}

impl GaussianPathSampler {
    pub fn new(kernel: CovKernel, grid: &Grid) -> Result<Self> {
        let positive: Vec<usize> = (0..grid.len()).filter(|&i| grid.points()[i] > 0.0).collect();
        let points: Vec<f64> = positive.iter().map(|&i| grid.points()[i]).collect();
        let factor = factorize(&kernel.gram(&points), points.len())?;
        Ok(GaussianPathSampler {
            kernel,
            grid: grid.clone(),
            positive,
            factor,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> TrajectoryGrid {
        let g = self.positive.len();
        let mut z = vec![0.0; g];
        rng::fill_normals(rng, &mut z);
        let mut x = vec![0.0; g];
        self.factor.apply(&z, &mut x);
        let mut values = vec![0.0; self.grid.len()];
        for (slot, v) in self.positive.iter().zip(x) {
            values[*slot] = v;
        }
        TrajectoryGrid {
            kind: self.kernel.trajectory_kind(),
            n: 0,
            grid: self.grid.clone(),
            values,
        }
    }
}

pub fn simulate_gaussian_path(kernel: CovKernel, grid: &Grid, seed: u64) -> Result<TrajectoryGrid> {
    Ok(GaussianPathSampler::new(kernel, grid)?.sample(&mut rng::rng_from_seed(seed)))
}

/// Scales a path by `S_α^{1/2}`.
pub fn mix_with_diversity(path: &TrajectoryGrid, s_alpha: f64) -> Result<TrajectoryGrid> {
    if !(s_alpha >= 0.0 && s_alpha.is_finite()) {
        return Err(Error::domain("s_alpha", "must be nonnegative"));
    }
    let scale = math::sqrt(s_alpha);
    Ok(TrajectoryGrid {
        values: path.values.iter().map(|v| v * scale).collect(),
        ..path.clone()
    })
}
