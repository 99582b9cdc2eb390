//! Simulation kernels for Ewens–Pitman `(α, θ)` random partitions.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only pure numerical
//! code: the sequential Chinese restaurant process, Poisson–Dirichlet and
//! GEM frequency samplers, the Karlin occupancy scheme with its exact
//! conditional means, the Gaussian limit kernels, and the estimators and
//! goodness-of-fit tests used to compare simulated fluctuations against
//! their limits. File formats, orchestration and the command line live in
//! the `ewens-pitman` crate.
//!
//! All randomness flows through [`rng::SimRng`], seeded from 64-bit
//! integers, so every sampler is a deterministic function of its inputs.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod frequencies;
pub mod limits;
pub mod math;
pub mod partitions;
pub mod rng;
pub mod stats;
pub mod trajectory;
pub mod urn;

pub use error::{Error, Result};
pub use frequencies::{FrequencyRealization, GemRealization};
pub use partitions::{CrpParams, CrpTrajectory, PartitionState};
pub use trajectory::{Grid, TrajectoryGrid, TrajectoryKind};
pub use urn::{OccupancyResult, PoissonizedRun};
