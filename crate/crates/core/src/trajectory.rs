use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increasing time points in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid(Vec<f64>);

impl Grid {
    /// `t_i = i / g` for `i = 0..=g`.
    pub fn uniform(g: usize) -> Self {
        assert!(g >= 1, "grid needs at least one interval");
        Grid((0..=g).map(|i| i as f64 / g as f64).collect())
    }

    pub fn new(points: Vec<f64>) -> Result<Self> {
        for &t in &points {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::GridPoint(t));
            }
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("grid", "points must be strictly increasing"));
        }
        if points.is_empty() {
            return Err(Error::domain("grid", "empty grid"));
        }
        Ok(Grid(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the point exactly equal to `t`, if any.
    pub fn position(&self, t: f64) -> Option<usize> {
        self.0.iter().position(|&x| x == t)
    }

    /// `⌊n t⌋` at every grid point.
    pub fn floor_indices(&self, n: u64) -> Vec<u64> {
        self.0.iter().map(|&t| crate::math::floor_index(n, t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    /// Sampling fluctuation around the conditional mean.
    W,
    /// Conditional mean around `⌊nt⌋^α S_α`.
    Y,
    /// Poissonized counterpart of `Y`.
    PoissonizedY,
    GaussianZ1,
    GaussianZ2,
    /// Time-changed Brownian motion `B_{t^α}`.
    GaussianB,
    /// Component count `K_⌊nt⌋ / n^α`.
    KScaled,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 7] = [
        TrajectoryKind::W,
        TrajectoryKind::Y,
        TrajectoryKind::PoissonizedY,
        TrajectoryKind::GaussianZ1,
        TrajectoryKind::GaussianZ2,
        TrajectoryKind::GaussianB,
        TrajectoryKind::KScaled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrajectoryKind::W => "W",
            TrajectoryKind::Y => "Y",
            TrajectoryKind::PoissonizedY => "poissonized-Y",
            TrajectoryKind::GaussianZ1 => "gaussian-Z1",
            TrajectoryKind::GaussianZ2 => "gaussian-Z2",
            TrajectoryKind::GaussianB => "gaussian-B",
            TrajectoryKind::KScaled => "K-scaled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Values of one process on a grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGrid {
    pub kind: TrajectoryKind,
    /// Scale `n`; zero for Gaussian limit paths.
    pub n: u64,
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl TrajectoryGrid {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.grid.position(t).map(|i| self.values[i])
    }

    /// Value at the last grid point.
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("trajectory is never empty")
    }
}
