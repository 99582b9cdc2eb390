//! Sequential Chinese restaurant process with `(α, θ)` seating.
//!
//! Only block sizes are kept. Blocks are indexed in creation order, and a
//! step consumes exactly one uniform `U`: with `x = U (n + θ)` and
//! `S_j` the sum of the first `j` block sizes, the new element joins the
//! first block `j` with `x < S_j − jα`, and opens a new block if there is
//! none. The linear scan and the Fenwick-tree search below evaluate the same
//! thresholds with the same floating-point operations, so they agree bit for
//! bit.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrpParams {
    alpha: f64,
    theta: f64,
}

impl CrpParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(theta.is_finite() && theta > -alpha) {
            return Err(Error::Theta { alpha, theta });
        }
        Ok(CrpParams { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Alpha(alpha))
    }
}

/// Block sizes of `Π_n` in creation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionState {
    block_sizes: Vec<u64>,
    n: u64,
}

impl PartitionState {
    /// `Π_1 = {{1}}`.
    pub fn singleton() -> Self {
        PartitionState {
            block_sizes: vec![1],
            n: 1,
        }
    }

    pub fn from_sizes(block_sizes: Vec<u64>) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::State("no blocks".into()));
        }
        if let Some(i) = block_sizes.iter().position(|&s| s == 0) {
            return Err(Error::State(format!("block {i} is empty")));
        }
        let n = block_sizes.iter().sum();
        Ok(PartitionState { block_sizes, n })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_sizes(&self) -> &[u64] {
        &self.block_sizes
    }

    /// Number of blocks of each size.
    pub fn size_counts(&self) -> BTreeMap<u64, u64> {
        let mut counts = BTreeMap::new();
        for &s in &self.block_sizes {
            *counts.entry(s).or_insert(0) += 1;
        }
        counts
    }

    fn apply(&mut self, seating: Seating) {
        match seating {
            Seating::Join(j) => self.block_sizes[j] += 1,
            Seating::New => self.block_sizes.push(1),
        }
        self.n += 1;
    }
}

/// Outcome of one seating step; `Join` carries the zero-based block index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seating {
    Join(usize),
    New,
}

/// Rule probabilities from `state`: `(size_j − α)/(n + θ)` for each block
/// and `(kα + θ)/(n + θ)` for a new one.
pub fn seating_probabilities(state: &PartitionState, params: &CrpParams) -> (Vec<f64>, f64) {
    let denom = state.n as f64 + params.theta;
    let join = state
        .block_sizes
        .iter()
        .map(|&s| (s as f64 - params.alpha) / denom)
        .collect();
    let new = (state.k() as f64 * params.alpha + params.theta) / denom;
    (join, new)
}

#[inline]
fn threshold(prefix: u64, blocks: usize, alpha: f64) -> f64 {
    prefix as f64 - blocks as f64 * alpha
}

/// Maps a uniform `u ∈ [0, 1)` to a seating decision by scanning blocks in
/// creation order.
pub fn choose_seating(state: &PartitionState, params: &CrpParams, u: f64) -> Seating {
    let x = u * (state.n as f64 + params.theta);
    let mut prefix = 0u64;
    for (j, &s) in state.block_sizes.iter().enumerate() {
        prefix += s;
        if x < threshold(prefix, j + 1, params.alpha) {
            return Seating::Join(j);
        }
    }
    Seating::New
}

/// Adds element `n + 1` to `state`, drawing one uniform from `rng`.
pub fn crp_step<R: RngCore + ?Sized>(
    state: &mut PartitionState,
    params: &CrpParams,
    rng: &mut R,
) -> Seating {
    let seating = choose_seating(state, params, rng::uniform(rng));
    state.apply(seating);
    seating
}

/// Prefix sums of block sizes supporting append, point update and the
/// threshold search in `O(log k)`.
#[derive(Debug, Clone, Default)]
struct Fenwick {
    tree: Vec<u64>, // 1-based; tree[0] unused
}

impl Fenwick {
    fn new() -> Self {
        Fenwick { tree: vec![0] }
    }

    fn len(&self) -> usize {
        self.tree.len() - 1
    }

    fn push(&mut self, value: u64) {
        let i = self.tree.len();
        let low = i & i.wrapping_neg();
        let mut acc = value;
        let mut j = i - 1;
        while j > i - low {
            acc += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        self.tree.push(acc);
    }

    fn increment(&mut self, index: usize) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest zero-based block `j` with `x < S_{j+1} − (j+1)α`.
    fn search(&self, x: f64, alpha: f64) -> Option<usize> {
        let k = self.len();
        let mut pos = 0usize;
        let mut acc = 0u64;
        let mut step = if k == 0 { 0 } else { 1usize << (usize::BITS - 1 - k.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= k && threshold(acc + self.tree[next], next, alpha) <= x {
                pos = next;
                acc += self.tree[next];
            }
            step >>= 1;
        }
        (pos < k).then_some(pos)
    }
}

/// Block-selection strategy for [`simulate_crp_with`]. Both produce the
/// same trajectory for the same random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeatingSearch {
    Linear,
    #[default]
    Fenwick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpTrajectory {
    pub params: CrpParams,
    /// Entry `m − 1` is `K_m`.
    pub k_history: Vec<u32>,
    /// `j ↦ C_{n,j}`, the number of blocks of size `j`.
    pub final_size_counts: BTreeMap<u64, u64>,
}

impl CrpTrajectory {
    pub fn n(&self) -> u64 {
        self.k_history.len() as u64
    }

    pub fn k_final(&self) -> u32 {
        *self.k_history.last().expect("trajectory has n >= 1")
    }

    /// `K_m`, with `K_0 = 0`.
    pub fn k_at(&self, m: u64) -> u32 {
        if m == 0 {
            0
        } else {
            self.k_history[(m - 1) as usize]
        }
    }

    pub fn size_count(&self, j: u64) -> u64 {
        self.final_size_counts.get(&j).copied().unwrap_or(0)
    }
}

pub fn simulate_crp(n: u64, params: CrpParams, seed: u64) -> Result<CrpTrajectory> {
    let mut rng = rng::rng_from_seed(seed);
    simulate_crp_with(n, params, &mut rng, SeatingSearch::default())
}

pub fn simulate_crp_with(
    n: u64,
    params: CrpParams,
    rng: &mut SimRng,
    search: SeatingSearch,
) -> Result<CrpTrajectory> {
    if n == 0 {
        return Err(Error::domain("n", "must be at least 1"));
    }
    let mut state = PartitionState::singleton();
    let mut k_history = Vec::with_capacity(n as usize);
    k_history.push(1u32);
    match search {
        SeatingSearch::Linear => {
            for _ in 1..n {
                crp_step(&mut state, &params, rng);
                k_history.push(state.k() as u32);
            }
        }
        SeatingSearch::Fenwick => {
            let mut index = Fenwick::new();
            index.push(1);
            for _ in 1..n {
                let x = rng::uniform(rng) * (state.n as f64 + params.theta);
                let seating = match index.search(x, params.alpha) {
                    Some(j) => {
                        index.increment(j);
                        Seating::Join(j)
                    }
                    None => {
                        index.push(1);
                        Seating::New
                    }
                };
                state.apply(seating);
                k_history.push(state.k() as u32);
            }
        }
    }
    Ok(CrpTrajectory {
        params,
        k_history,
        final_size_counts: state.size_counts(),
    })
}

/// α-Sibuya probability mass `αΓ(j−α) / (Γ(1−α) Γ(j+1))`.
pub fn sibuya_pmf(j: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if j == 0 {
        return Err(Error::domain("j", "must be at least 1"));
    }
    let j = j as f64;
    Ok(math::exp(
        math::log(alpha) + math::ln_gamma(j - alpha)
            - math::ln_gamma(1.0 - alpha)
            - math::ln_gamma(j + 1.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(a: f64, t: f64) -> CrpParams {
        CrpParams::new(a, t).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(CrpParams::new(0.0, 1.0), Err(Error::Alpha(_))));
        assert!(matches!(CrpParams::new(1.0, 1.0), Err(Error::Alpha(_))));
        assert!(matches!(CrpParams::new(0.5, -0.5), Err(Error::Theta { .. })));
        assert!(CrpParams::new(0.5, -0.49).is_ok());
    }

    #[test]
    fn rule_probabilities_example() {
        let state = PartitionState::from_sizes(vec![2, 1]).unwrap();
        let (join, new) = seating_probabilities(&state, &params(0.5, 0.5));
        assert!((new - 3.0 / 7.0).abs() < 1e-15);
        assert!((join[0] - 3.0 / 7.0).abs() < 1e-15);
        assert!((join[1] - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn rule_probabilities_singleton() {
        let (join, new) = seating_probabilities(&PartitionState::singleton(), &params(0.3, 0.0));
        assert!((new - 0.3).abs() < 1e-15);
        assert!((join[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn choose_seating_boundaries() {
        // sizes [2,1], α = θ = 0.5: x = 3.5u, thresholds 1.5 and 2.0
        let state = PartitionState::from_sizes(vec![2, 1]).unwrap();
        let p = params(0.5, 0.5);
        assert_eq!(choose_seating(&state, &p, 0.0), Seating::Join(0));
        assert_eq!(choose_seating(&state, &p, 1.49 / 3.5), Seating::Join(0));
        assert_eq!(choose_seating(&state, &p, 1.51 / 3.5), Seating::Join(1));
        assert_eq!(choose_seating(&state, &p, 2.01 / 3.5), Seating::New);
        assert_eq!(choose_seating(&state, &p, 0.999_999), Seating::New);
    }

    #[test]
    fn one_step_law_matches_rules() {
        let state = PartitionState::from_sizes(vec![3, 1, 2]).unwrap();
        let p = params(0.4, 1.2);
        let (join, new) = seating_probabilities(&state, &p);
        let trials = 40_000;
        let mut rng = rng::rng_from_seed(99);
        let mut counts = [0u32; 4];
        for _ in 0..trials {
            let mut s = state.clone();
            match crp_step(&mut s, &p, &mut rng) {
                Seating::Join(j) => counts[j] += 1,
                Seating::New => counts[3] += 1,
            }
        }
        let probs = [join[0], join[1], join[2], new];
        for (c, q) in counts.iter().zip(probs) {
            let freq = *c as f64 / trials as f64;
            let se = (q * (1.0 - q) / trials as f64).sqrt();
            assert!((freq - q).abs() < 4.0 * se, "freq {freq} vs {q}");
        }
    }

    #[test]
    fn first_step_is_singleton() {
        let t = simulate_crp(1, params(0.5, 0.0), 1).unwrap();
        assert_eq!(t.k_history, vec![1]);
        assert_eq!(t.final_size_counts.get(&1), Some(&1));
        assert!(simulate_crp(0, params(0.5, 0.0), 1).is_err());
    }

    #[test]
    fn k2_probability() {
        // P(K_2 = 2) = (α + θ)/(1 + θ) = 0.5
        let p = params(0.5, 0.0);
        let reps = 20_000;
        let hits = (0..reps)
            .filter(|&s| simulate_crp(2, p, rng::derive_seed(5, s)).unwrap().k_final() == 2)
            .count();
        let freq = hits as f64 / reps as f64;
        assert!((freq - 0.5).abs() < 3.0 * (0.25f64 / reps as f64).sqrt());
    }

    #[test]
    fn k3_probability_matches_path_product() {
        // unique path to K_3 = 3: new (1/2) then new ((2α)/(2+θ))
        let p = params(0.5, 0.0);
        let exact = (0.5 / 1.0) * (2.0 * 0.5 / 2.0);
        assert!((exact - 0.25f64).abs() < 1e-15);
        let reps = 20_000;
        let hits = (0..reps)
            .filter(|&s| simulate_crp(3, p, rng::derive_seed(6, s)).unwrap().k_final() == 3)
            .count();
        let freq = hits as f64 / reps as f64;
        assert!((freq - exact).abs() < 3.0 * (exact * (1.0 - exact) / reps as f64).sqrt());
    }

    #[test]
    fn fenwick_and_linear_agree() {
        for (a, t, seed) in [(0.5, 0.0, 1u64), (0.2, 5.0, 2), (0.9, -0.5, 3), (0.7, 30.0, 4)] {
            let p = params(a, t);
            let lin = simulate_crp_with(3000, p, &mut rng::rng_from_seed(seed), SeatingSearch::Linear)
                .unwrap();
            let fen =
                simulate_crp_with(3000, p, &mut rng::rng_from_seed(seed), SeatingSearch::Fenwick)
                    .unwrap();
            assert_eq!(lin, fen);
        }
    }

    #[test]
    fn sibuya_values() {
        assert!((sibuya_pmf(1, 0.4).unwrap() - 0.4).abs() < 1e-14);
        assert!((sibuya_pmf(2, 0.5).unwrap() - 0.125).abs() < 1e-14);
        let total: f64 = (1..=1_000_000u64).map(|j| sibuya_pmf(j, 0.7).unwrap()).sum();
        assert!(total > 0.99 && total < 1.0, "{total}");
        assert!(sibuya_pmf(0, 0.5).is_err());
        assert!(sibuya_pmf(1, 1.0).is_err());
    }

    #[test]
    fn size_count_ratios_approach_sibuya() {
        let p = params(0.5, 0.0);
        let reps = 200u64;
        let n = 20_000;
        let mut ratio = [0.0f64; 3];
        for r in 0..reps {
            let t = simulate_crp(n, p, rng::derive_seed(77, r)).unwrap();
            let k = t.k_final() as f64;
            for (j, acc) in ratio.iter_mut().enumerate() {
                *acc += t.size_count(j as u64 + 1) as f64 / k;
            }
        }
        for (j, acc) in ratio.iter().enumerate() {
            let mean = acc / reps as f64;
            let target = sibuya_pmf(j as u64 + 1, 0.5).unwrap();
            assert!((mean - target).abs() < 0.1 * target, "j={} {mean} vs {target}", j + 1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn trajectory_invariants(a in 0.01f64..0.99, t_off in 0.001f64..10.0, n in 1u64..2000, seed: u64) {
            let p = params(a, t_off - a);
            let traj = simulate_crp(n, p, seed).unwrap();
            prop_assert_eq!(traj.k_history.len() as u64, n);
            prop_assert_eq!(traj.k_history[0], 1);
            for w in traj.k_history.windows(2) {
                prop_assert!(w[1] == w[0] || w[1] == w[0] + 1);
            }
            let total: u64 = traj.final_size_counts.iter().map(|(j, c)| j * c).sum();
            let blocks: u64 = traj.final_size_counts.values().sum();
            prop_assert_eq!(total, n);
            prop_assert_eq!(blocks, traj.k_final() as u64);
        }

        #[test]
        fn rule_probabilities_sum_to_one(a in 0.01f64..0.99, t_off in 0.001f64..10.0,
                                          sizes in proptest::collection::vec(1u64..50, 1..20)) {
            let state = PartitionState::from_sizes(sizes).unwrap();
            let (join, new) = seating_probabilities(&state, &params(a, t_off - a));
            let total: f64 = join.iter().sum::<f64>() + new;
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
