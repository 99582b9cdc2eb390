//! Karlin occupancy scheme driven by a [`FrequencyRealization`].
//!
//! Cells are the ordered frequencies followed by one reservoir cell carrying
//! the tail mass, so a truncated realization opens at most one extra
//! component. Each draw consumes one uniform.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequencies::FrequencyRealization;
use crate::math;
use crate::rng;
use crate::trajectory::{Grid, TrajectoryGrid, TrajectoryKind};

/// Inverse-CDF sampler over a cumulative table (binary search).
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    cumulative: Vec<f64>,
}

impl CumulativeTable {
    pub fn new(masses: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = masses
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        CumulativeTable { cumulative }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    #[inline]
    pub fn sample(&self, u: f64) -> usize {
        let x = u * self.cumulative[self.cumulative.len() - 1];
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

/// Vose alias table; one uniform selects the column and the coin.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(masses: &[f64]) -> Self {
        let n = masses.len();
        assert!(n > 0 && n <= u32::MAX as usize, "alias table size");
        let total: f64 = math::pairwise_sum(masses);
        let mut scaled: Vec<f64> = masses.iter().map(|p| p * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are numerically one
        AliasTable { prob, alias }
    }

    #[inline]
    pub fn sample(&self, u: f64) -> usize {
        let x = u * self.prob.len() as f64;
        let i = (x as usize).min(self.prob.len() - 1);
        if x - (i as f64) < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalMethod {
    #[default]
    Cumulative,
    Alias,
}

#[derive(Debug, Clone)]
enum Table {
    Cumulative(CumulativeTable),
    Alias(AliasTable),
}

/// Categorical sampler over the cells of one realization, built once and
/// reused across occupancy replicates.
#[derive(Debug, Clone)]
pub struct UrnSampler {
    table: Table,
    cells: usize,
}

impl UrnSampler {
    pub fn new(real: &FrequencyRealization) -> Self {
        Self::with_method(real, CategoricalMethod::Cumulative)
    }

    pub fn with_method(real: &FrequencyRealization, method: CategoricalMethod) -> Self {
        let masses: Vec<f64> = real.cell_masses().collect();
        let cells = masses.len();
        let table = match method {
            CategoricalMethod::Cumulative => Table::Cumulative(CumulativeTable::new(masses)),
            CategoricalMethod::Alias => Table::Alias(AliasTable::new(&masses)),
        };
        UrnSampler { table, cells }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng::uniform(rng);
        match &self.table {
            Table::Cumulative(t) => t.sample(u),
            Table::Alias(t) => t.sample(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyResult {
    pub n: u64,
    /// Entry `m − 1` is `K_m`.
    pub k_history: Vec<u32>,
    /// Occupied cell `ℓ ↦ K_{n,ℓ}`.
    pub occupancy: BTreeMap<usize, u64>,
}

impl OccupancyResult {
    /// `K_m`, with `K_0 = 0`.
    pub fn k_at(&self, m: u64) -> u32 {
        if m == 0 {
            0
        } else {
            self.k_history[(m - 1) as usize]
        }
    }

    pub fn k_final(&self) -> u32 {
        self.k_at(self.n)
    }
}

pub fn sample_occupancy(real: &FrequencyRealization, n: u64, seed: u64) -> Result<OccupancyResult> {
    sample_occupancy_with(&UrnSampler::new(real), n, &mut rng::rng_from_seed(seed))
}

pub fn sample_occupancy_with<R: RngCore + ?Sized>(
    sampler: &UrnSampler,
    n: u64,
    rng: &mut R,
) -> Result<OccupancyResult> {
    if n == 0 {
        return Err(Error::domain("n", "must be at least 1"));
    }
    let mut counts = vec![0u32; sampler.cells()];
    let mut k_history = Vec::with_capacity(n as usize);
    let mut k = 0u32;
    for _ in 0..n {
        let cell = sampler.draw(rng);
        if counts[cell] == 0 {
            k += 1;
        }
        counts[cell] += 1;
        k_history.push(k);
    }
    let occupancy = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c as u64))
        .collect();
    Ok(OccupancyResult {
        n,
        k_history,
        occupancy,
    })
}

/// `E(K_n | P) = Σ_ℓ (1 − (1 − P_ℓ)^n)` by direct summation over all cells.
pub fn conditional_mean_k(real: &FrequencyRealization, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let m = n as f64;
    let masses: Vec<f64> = real.cell_masses().collect();
    math::pairwise_sum_by(&masses, &|p| -math::expm1(m * math::log1p(-p)))
}

/// `E(K̃(t) | P) = Σ_ℓ (1 − e^{−P_ℓ t})`.
pub fn poissonized_mean_k(real: &FrequencyRealization, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("t", "must be nonnegative"));
    }
    let masses: Vec<f64> = real.cell_masses().collect();
    Ok(math::pairwise_sum_by(&masses, &|p| -math::expm1(-p * t)))
}

const SERIES_TERMS: usize = 6;
/// Cells with `m p` (or `t p`) at most this use the power-series tail.
const SERIES_CUTOFF: f64 = 0.05;

/// Fast evaluator of the conditional means for one realization.
///
/// Cells are sorted by decreasing mass. Cells with `m p > 0.05` are summed
/// directly; the rest use the alternating binomial (or exponential) series
/// truncated after six terms against precomputed suffix power sums, with
/// error at most `(m p)^7 / 7!` per cell.
#[derive(Debug, Clone)]
pub struct MeanEvaluator {
    masses: Vec<f64>,
    suffix: Vec<[f64; SERIES_TERMS]>,
}

impl MeanEvaluator {
    pub fn new(real: &FrequencyRealization) -> Self {
        // freqs are nonincreasing; only the reservoir cell needs placing
        let mut masses: Vec<f64> = real.freqs().to_vec();
        let tail = real.tail_mass();
        if tail > 0.0 {
            masses.insert(masses.partition_point(|&p| p >= tail), tail);
        }
        let mut suffix = vec![[0.0; SERIES_TERMS]; masses.len() + 1];
        for i in (0..masses.len()).rev() {
            let p = masses[i];
            let mut pk = 1.0;
            let mut row = suffix[i + 1];
            for slot in row.iter_mut() {
                pk *= p;
                *slot += pk;
            }
            suffix[i] = row;
        }
        MeanEvaluator { masses, suffix }
    }

    fn split(&self, scale: f64) -> usize {
        let cutoff = SERIES_CUTOFF / scale;
        self.masses.partition_point(|&p| p > cutoff)
    }

    /// `E(K_m | P)`.
    pub fn binomial(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let mf = m as f64;
        let j0 = self.split(mf);
        let head = math::pairwise_sum_by(&self.masses[..j0], &|p| -math::expm1(mf * math::log1p(-p)));
        let sums = &self.suffix[j0];
        let mut tail = 0.0;
        let mut coeff = 1.0;
        for (k, s) in sums.iter().enumerate() {
            // coeff = C(m, k+1)
            coeff *= (mf - k as f64) / (k as f64 + 1.0);
            if coeff == 0.0 {
                break;
            }
            let term = coeff * s;
            tail += if k % 2 == 0 { term } else { -term };
        }
        head + tail
    }

    /// `E(K̃(t) | P)`.
    pub fn poissonized(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let j0 = self.split(t);
        let head = math::pairwise_sum_by(&self.masses[..j0], &|p| -math::expm1(-p * t));
        let sums = &self.suffix[j0];
        let mut tail = 0.0;
        let mut coeff = 1.0;
        for (k, s) in sums.iter().enumerate() {
            coeff *= t / (k as f64 + 1.0);
            let term = coeff * s;
            tail += if k % 2 == 0 { term } else { -term };
        }
        head + tail
    }
}

/// Conditional means `E(K_⌊nt⌋ | P)` on a grid, shared by every occupancy
/// replicate of a realization.
#[derive(Debug, Clone)]
pub struct GridMeans {
    n: u64,
    alpha: f64,
    diversity: f64,
    grid: Grid,
    indices: Vec<u64>,
    means: Vec<f64>,
    scale: f64,
}

impl GridMeans {
    pub fn new(real: &FrequencyRealization, n: u64, grid: &Grid) -> Self {
        Self::with_evaluator(real, &MeanEvaluator::new(real), n, grid)
    }

    pub fn with_evaluator(
        real: &FrequencyRealization,
        eval: &MeanEvaluator,
        n: u64,
        grid: &Grid,
    ) -> Self {
        let indices = grid.floor_indices(n);
        let means = indices.iter().map(|&m| eval.binomial(m)).collect();
        GridMeans {
            n,
            alpha: real.alpha(),
            diversity: real.diversity(),
            grid: grid.clone(),
            indices,
            means,
            scale: math::pow(n as f64, real.alpha() / 2.0),
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `⌊n t_i⌋`.
    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// `n^{α/2}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `W_n(t_i) = (K_⌊nt_i⌋ − E(K_⌊nt_i⌋ | P)) / n^{α/2}`.
    pub fn w(&self, occ: &OccupancyResult) -> Result<TrajectoryGrid> {
        if occ.n < self.n {
            return Err(Error::domain("occupancy", "sample shorter than n"));
        }
        let values = self
            .indices
            .iter()
            .zip(&self.means)
            .map(|(&m, &mean)| (occ.k_at(m) as f64 - mean) / self.scale)
            .collect();
        Ok(self.trajectory(TrajectoryKind::W, values))
    }

    /// `Y_n(t_i) = (E(K_⌊nt_i⌋ | P) − ⌊nt_i⌋^α S_α) / n^{α/2}`.
    pub fn y(&self) -> TrajectoryGrid {
        let values = self
            .indices
            .iter()
            .zip(&self.means)
            .map(|(&m, &mean)| {
                (mean - math::pow(m as f64, self.alpha) * self.diversity) / self.scale
            })
            .collect();
        self.trajectory(TrajectoryKind::Y, values)
    }

    fn trajectory(&self, kind: TrajectoryKind, values: Vec<f64>) -> TrajectoryGrid {
        TrajectoryGrid {
            kind,
            n: self.n,
            grid: self.grid.clone(),
            values,
        }
    }
}

pub fn w_trajectory(
    occ: &OccupancyResult,
    real: &FrequencyRealization,
    grid: &Grid,
) -> Result<TrajectoryGrid> {
    GridMeans::new(real, occ.n, grid).w(occ)
}

pub fn y_trajectory(real: &FrequencyRealization, n: u64, grid: &Grid) -> TrajectoryGrid {
    GridMeans::new(real, n, grid).y()
}

/// `Ỹ_n(t) = (E(K̃(nt) | P) − Γ(1−α) D (nt)^α) / n^{α/2}`.
pub fn poissonized_y_trajectory(
    real: &FrequencyRealization,
    n: u64,
    grid: &Grid,
) -> TrajectoryGrid {
    let eval = MeanEvaluator::new(real);
    let scale = math::pow(n as f64, real.alpha() / 2.0);
    let values = grid
        .points()
        .iter()
        .map(|&t| {
            let time = n as f64 * t;
            (eval.poissonized(time) - real.diversity() * math::pow(time, real.alpha())) / scale
        })
        .collect();
    TrajectoryGrid {
        kind: TrajectoryKind::PoissonizedY,
        n,
        grid: grid.clone(),
        values,
    }
}

/// Poissonized urn coupled to the fixed-size urn.
///
/// Events of the superposed unit-rate process arrive at `T_1 < T_2 < …`
/// and carry i.i.d. cell marks. The marks use the same stream as
/// [`sample_occupancy`] with the same seed, so the `m`-th mark equals the
/// `m`-th urn draw and `K̃(T_m) = K_m`. `K̃` itself is read from the
/// first-arrival time of each opened cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonizedRun {
    pub n: u64,
    /// All events up to this time are simulated.
    pub horizon: f64,
    pub grid: Grid,
    /// `T_1, T_2, …` (at least `n` of them).
    pub event_times: Vec<f64>,
    /// First-arrival time of every opened cell, increasing.
    pub first_arrivals: Vec<f64>,
    /// `λ_n(t_i) = T_⌊nt_i⌋ / n`, with `T_0 = 0`.
    pub lambda_times: Vec<f64>,
}

const EVENT_TIME_STREAM: u64 = 0x5eed_7133_e5ca_1e00;

pub fn poissonized_run(
    real: &FrequencyRealization,
    n: u64,
    grid: &Grid,
    seed: u64,
) -> Result<PoissonizedRun> {
    poissonized_run_with(&UrnSampler::new(real), n, grid, seed)
}

pub fn poissonized_run_with(
    sampler: &UrnSampler,
    n: u64,
    grid: &Grid,
    seed: u64,
) -> Result<PoissonizedRun> {
    if n == 0 {
        return Err(Error::domain("n", "must be at least 1"));
    }
    let t_max = grid.points().last().copied().unwrap_or(0.0);
    let target = n as f64 * t_max;
    let mut marks = rng::rng_from_seed(seed);
    let mut clock = rng::rng_from_seed(rng::mix64(seed ^ EVENT_TIME_STREAM));
    let mut opened = vec![false; sampler.cells()];
    let mut event_times = Vec::with_capacity(n as usize + 16);
    let mut first_arrivals = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng::exp1(&mut clock);
        let cell = sampler.draw(&mut marks);
        event_times.push(t);
        if !opened[cell] {
            opened[cell] = true;
            first_arrivals.push(t);
        }
        if event_times.len() as u64 >= n && t > target {
            break;
        }
    }
    let lambda_times = grid
        .floor_indices(n)
        .iter()
        .map(|&m| if m == 0 { 0.0 } else { event_times[m as usize - 1] / n as f64 })
        .collect();
    Ok(PoissonizedRun {
        n,
        horizon: t,
        grid: grid.clone(),
        event_times,
        first_arrivals,
        lambda_times,
    })
}

impl PoissonizedRun {
    /// `K̃(t)`, the number of cells with an arrival in `[0, t]`.
    pub fn k_tilde(&self, t: f64) -> Result<u32> {
        if t > self.horizon {
            return Err(Error::Horizon {
                time: t,
                horizon: self.horizon,
            });
        }
        Ok(self.first_arrivals.partition_point(|&a| a <= t) as u32)
    }

    /// `K̃(n t_i)` on the grid.
    pub fn k_tilde_on_grid(&self) -> Result<Vec<u32>> {
        self.grid
            .points()
            .iter()
            .map(|&t| self.k_tilde(self.n as f64 * t))
            .collect()
    }

    /// `K̃(n λ_n(t_i))`, evaluated at the stored event time `T_⌊nt_i⌋`
    /// so that no rounding of `n · (T/n)` enters.
    pub fn coupled_k(&self) -> Vec<u32> {
        self.grid
            .floor_indices(self.n)
            .iter()
            .map(|&m| {
                if m == 0 {
                    0
                } else {
                    let t = self.event_times[m as usize - 1];
                    self.first_arrivals.partition_point(|&a| a <= t) as u32
                }
            })
            .collect()
    }

    /// `sup_i |λ_n(t_i) − t_i|`.
    pub fn max_time_change_error(&self) -> f64 {
        self.grid
            .points()
            .iter()
            .zip(&self.lambda_times)
            .map(|(t, l)| (l - t).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequencies::{sample_pd_theta0, FrequencyRealization, TailCompletion};
    use proptest::prelude::*;

    fn fixed(freqs: Vec<f64>) -> FrequencyRealization {
        FrequencyRealization::from_parts(0.5, 0.0, freqs, 1.0).unwrap()
    }

    #[test]
    fn single_cell() {
        let real = fixed(vec![1.0]);
        let occ = sample_occupancy(&real, 500, 3).unwrap();
        assert!(occ.k_history.iter().all(|&k| k == 1));
        assert_eq!(conditional_mean_k(&real, 17), 1.0);
        assert_eq!(conditional_mean_k(&real, 0), 0.0);
    }

    #[test]
    fn two_cells_brute_force() {
        // outcomes {11, 12, 21, 22} equally likely: E[K_2] = (1 + 2 + 2 + 1)/4
        let real = fixed(vec![0.5, 0.5]);
        let brute = [1.0, 2.0, 2.0, 1.0].iter().sum::<f64>() / 4.0;
        assert_eq!(brute, 1.5);
        assert!((conditional_mean_k(&real, 2) - brute).abs() < 1e-15);
        let reps = 20_000u64;
        let mean = (0..reps)
            .map(|r| sample_occupancy(&real, 2, rng::derive_seed(1, r)).unwrap().k_final() as f64)
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 1.5).abs() < 4.0 * (0.25f64 / reps as f64).sqrt());
    }

    #[test]
    fn conditional_mean_matches_replicates() {
        let real = fixed(vec![0.4, 0.3, 0.15, 0.1, 0.05]);
        let n = 6;
        let exact = conditional_mean_k(&real, n);
        let reps = 20_000u64;
        let ks: Vec<f64> = (0..reps)
            .map(|r| sample_occupancy(&real, n, rng::derive_seed(9, r)).unwrap().k_final() as f64)
            .collect();
        let mean = ks.iter().sum::<f64>() / reps as f64;
        let var = ks.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - exact).abs() < 4.0 * (var / reps as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn poissonized_mean_single_atom() {
        let real = fixed(vec![0.3]);
        // reservoir holds 0.7
        let t = 2.5;
        let expected = (1.0 - (-0.3f64 * t).exp()) + (1.0 - (-0.7f64 * t).exp());
        assert!((poissonized_mean_k(&real, t).unwrap() - expected).abs() < 1e-15);
        assert_eq!(poissonized_mean_k(&real, 0.0).unwrap(), 0.0);
        assert!(poissonized_mean_k(&real, -1.0).is_err());
    }

    #[test]
    fn poissonized_mean_matches_counting_integral() {
        // ν(x) = #{ℓ : 1/P_ℓ ≤ x}; E(K̃(t)|P) = ∫_0^∞ e^{-x} ν(t/x) dx
        let freqs = [0.5f64, 0.3, 0.2];
        let real = fixed(freqs.to_vec());
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let left = (m - a) / 6.0 * (f(a) + 4.0 * f(lm) + f(m));
            let right = (b - m) / 6.0 * (f(m) + 4.0 * f(rm) + f(b));
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, m, tol / 2.0, depth - 1) + simpson(f, m, b, tol / 2.0, depth - 1)
            }
        }
        for t in [0.1, 1.0, 4.0, 25.0] {
            let nu = |x: f64| freqs.iter().filter(|&&p| 1.0 / p <= t / x).count() as f64;
            let integrand = |x: f64| (-x).exp() * nu(x);
            // split at the jumps x = t P_ℓ so each piece is smooth
            let mut cuts: Vec<f64> = freqs.iter().map(|p| t * p).collect();
            cuts.push(0.0);
            cuts.sort_by(f64::total_cmp);
            let quad: f64 = cuts
                .windows(2)
                .map(|w| {
                    let eps = 1e-15 * w[1];
                    simpson(&integrand, w[0] + eps, w[1] - eps, 1e-13, 40)
                })
                .sum();
            let exact = poissonized_mean_k(&real, t).unwrap();
            assert!((quad - exact).abs() < 1e-8, "t={t}: {quad} vs {exact}");
        }
    }

    #[test]
    fn evaluator_matches_direct_sums() {
        let real = sample_pd_theta0(0.5, 100_000, 5).unwrap();
        let eval = MeanEvaluator::new(&real);
        for m in [0u64, 1, 2, 3, 7, 100, 1234, 10_000, 100_000, 1_000_000] {
            let direct = conditional_mean_k(&real, m);
            let fast = eval.binomial(m);
            assert!((direct - fast).abs() < 1e-9 * direct.max(1.0), "m={m}: {direct} vs {fast}");
            let t = m as f64 * 0.77;
            let direct = poissonized_mean_k(&real, t).unwrap();
            let fast = eval.poissonized(t);
            assert!((direct - fast).abs() < 1e-9 * direct.max(1.0), "t={t}: {direct} vs {fast}");
        }
    }

    #[test]
    fn conditional_mean_is_monotone() {
        let real = sample_pd_theta0(0.7, 2000, 2).unwrap();
        let mut prev = 0.0;
        for m in 0..3000u64 {
            let v = conditional_mean_k(&real, m);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn alias_and_cumulative_agree_in_law() {
        let real = sample_pd_theta0(0.5, 50, 7).unwrap();
        let masses: Vec<f64> = real.cell_masses().collect();
        for method in [CategoricalMethod::Cumulative, CategoricalMethod::Alias] {
            let sampler = UrnSampler::with_method(&real, method);
            let mut rng = rng::rng_from_seed(1);
            let draws = 200_000;
            let mut counts = vec![0u32; masses.len()];
            for _ in 0..draws {
                counts[sampler.draw(&mut rng)] += 1;
            }
            for (c, p) in counts.iter().zip(&masses).take(10) {
                let f = *c as f64 / draws as f64;
                assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / draws as f64).sqrt(), "{method:?}");
            }
        }
    }

    #[test]
    fn trajectories_start_at_zero() {
        let real = sample_pd_theta0(0.5, 1000, 3).unwrap();
        let grid = Grid::uniform(20);
        let occ = sample_occupancy(&real, 1000, 4).unwrap();
        let w = w_trajectory(&occ, &real, &grid).unwrap();
        let y = y_trajectory(&real, 1000, &grid);
        assert_eq!(w.values[0], 0.0);
        assert_eq!(y.values[0], 0.0);
        assert_eq!(w.values.len(), 21);
        // decomposition identity at t = 1
        let direct = (occ.k_final() as f64 - 1000f64.powf(0.5) * real.diversity()) / 1000f64.powf(0.25);
        assert!((w.terminal() + y.terminal() - direct).abs() < 1e-10);
    }

    #[test]
    fn y_is_stable_under_small_perturbations() {
        let real = sample_pd_theta0(0.5, 5000, 8).unwrap();
        let mut freqs = real.freqs().to_vec();
        freqs[3] *= 1.0 + 1e-9;
        let bumped = FrequencyRealization::from_parts(0.5, 0.0, freqs, real.diversity()).unwrap();
        let n = 10_000;
        let grid = Grid::uniform(4);
        let a = y_trajectory(&real, n, &grid).terminal();
        let b = y_trajectory(&bumped, n, &grid).terminal();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn coupling_is_exact() {
        let grid = Grid::uniform(50);
        for seed in 0..10u64 {
            let real = sample_pd_theta0(0.5, 2000, seed).unwrap();
            let run = poissonized_run(&real, 1000, &grid, seed).unwrap();
            let occ = sample_occupancy(&real, 1000, seed).unwrap();
            let coupled = run.coupled_k();
            for (m, k) in grid.floor_indices(1000).iter().zip(&coupled) {
                assert_eq!(occ.k_at(*m), *k);
            }
            let kt = run.k_tilde_on_grid().unwrap();
            assert_eq!(kt[0], 0);
            assert!(kt.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(run.lambda_times[0], 0.0);
            assert!(run.k_tilde(run.horizon * 2.0).is_err());
        }
    }

    #[test]
    fn poissonized_y_starts_at_zero() {
        let real =
            FrequencyRealization::from_arrivals(0.5, (1..=100).map(|k| k as f64).collect(), TailCompletion::Integral)
                .unwrap();
        let y = poissonized_y_trajectory(&real, 100, &Grid::uniform(10));
        assert_eq!(y.values[0], 0.0);
    }

    #[test]
    fn grid_rejects_out_of_range() {
        assert!(matches!(Grid::new(vec![0.0, 1.5]), Err(Error::GridPoint(_))));
        assert!(Grid::new(vec![0.5, 0.2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn occupancy_invariants(a in 0.1f64..0.9, j in 1usize..500, n in 1u64..3000, seed: u64) {
            let real = sample_pd_theta0(a, j, seed).unwrap();
            let occ = sample_occupancy(&real, n, seed ^ 1).unwrap();
            prop_assert_eq!(occ.k_history.len() as u64, n);
            prop_assert_eq!(occ.k_history[0], 1);
            for w in occ.k_history.windows(2) {
                prop_assert!(w[1] == w[0] || w[1] == w[0] + 1);
            }
            prop_assert_eq!(occ.occupancy.values().sum::<u64>(), n);
            prop_assert_eq!(occ.occupancy.len() as u32, occ.k_final());
        }
    }
}
