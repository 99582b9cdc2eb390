//! Frequency laws of the partition blocks.
//!
//! Ordered Poisson–Dirichlet `PD(α, 0)` frequencies come from the arrival
//! times `Γ̃_1 < Γ̃_2 < …` of a unit-rate Poisson process through
//! `P_j↓ = Γ̃_j^{−1/α} / Σ_k Γ̃_k^{−1/α}`. Only the first `J` arrivals are
//! simulated; the remaining power sum is completed by the integral
//! `∫_{Γ̃_J}^∞ x^{−1/α} dx = α/(1−α) Γ̃_J^{1−1/α}` and its share of the
//! normalization is reported as `tail_mass`. Size-biased `GEM(α, θ)`
//! frequencies come from stick breaking with `V_j ~ Beta(1−α, θ+jα)`.

use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::partitions::check_alpha;
use crate::rng::{self, SimRng};

/// Largest number of simulated frequencies the automatic truncation will pick.
pub const MAX_TRUNCATION: usize = 1 << 24;

/// Default bound on the tail mass left by automatic truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailCompletion {
    /// Add the integral surrogate of the missing power sum.
    #[default]
    Integral,
    /// Normalize over the simulated arrivals only.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    Fixed(usize),
    /// Smallest level whose expected tail mass is below half the tolerance.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdOptions {
    pub truncation: Truncation,
    pub tail: TailCompletion,
    /// Reject realizations whose tail mass exceeds this bound.
    pub max_tail_mass: Option<f64>,
}

impl Default for PdOptions {
    fn default() -> Self {
        PdOptions {
            truncation: Truncation::Auto,
            tail: TailCompletion::Integral,
            max_tail_mass: Some(DEFAULT_TAIL_TOLERANCE),
        }
    }
}

impl PdOptions {
    pub fn fixed(j: usize) -> Self {
        PdOptions {
            truncation: Truncation::Fixed(j),
            tail: TailCompletion::Integral,
            max_tail_mass: None,
        }
    }
}

/// One draw of the ordered frequencies together with their diversity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRealization")]
pub struct FrequencyRealization {
    alpha: f64,
    theta: f64,
    arrivals: Option<Vec<f64>>,
    freqs: Vec<f64>,
    diversity: f64,
    d_const: f64,
    truncation_level: usize,
    tail_mass: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRealization {
    alpha: f64,
    theta: f64,
    arrivals: Option<Vec<f64>>,
    freqs: Vec<f64>,
    diversity: f64,
    d_const: f64,
    truncation_level: usize,
    tail_mass: f64,
}

impl TryFrom<RawRealization> for FrequencyRealization {
    type Error = Error;

    fn try_from(raw: RawRealization) -> Result<Self> {
        let real = FrequencyRealization {
            alpha: raw.alpha,
            theta: raw.theta,
            arrivals: raw.arrivals,
            freqs: raw.freqs,
            diversity: raw.diversity,
            d_const: raw.d_const,
            truncation_level: raw.truncation_level,
            tail_mass: raw.tail_mass,
        };
        real.validate()?;
        Ok(real)
    }
}

impl FrequencyRealization {
    /// Builds a `θ = 0` realization from given arrival times.
    pub fn from_arrivals(alpha: f64, arrivals: Vec<f64>, tail: TailCompletion) -> Result<Self> {
        check_alpha(alpha)?;
        if arrivals.is_empty() {
            return Err(Error::domain("arrivals", "need at least one arrival"));
        }
        if arrivals[0] <= 0.0 || arrivals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("arrivals", "must be positive and strictly increasing"));
        }
        let exponent = -1.0 / alpha;
        // exp(e ln g) is about twice as fast as pow and within a few ulps
        let weights: Vec<f64> = arrivals.iter().map(|&g| math::exp(exponent * math::log(g))).collect();
        let tail_sum = match tail {
            TailCompletion::Integral => {
                let last = *arrivals.last().unwrap();
                alpha / (1.0 - alpha) * math::pow(last, 1.0 + exponent)
            }
            TailCompletion::None => 0.0,
        };
        let total = math::pairwise_sum(&weights) + tail_sum;
        let d_const = math::pow(total, -alpha);
        let freqs = weights.iter().map(|w| w / total).collect();
        let truncation_level = arrivals.len();
        Ok(FrequencyRealization {
            alpha,
            theta: 0.0,
            arrivals: Some(arrivals),
            freqs,
            diversity: math::gamma(1.0 - alpha) * d_const,
            d_const,
            truncation_level,
            tail_mass: tail_sum / total,
        })
    }

    /// Builds a realization from ordered frequencies and a diversity value.
    /// The unassigned mass `1 − Σ freqs` becomes the tail.
    pub fn from_parts(alpha: f64, theta: f64, freqs: Vec<f64>, diversity: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let tail_mass = (1.0 - math::pairwise_sum(&freqs)).max(0.0);
        let real = FrequencyRealization {
            alpha,
            theta,
            arrivals: None,
            truncation_level: freqs.len(),
            freqs,
            diversity,
            d_const: diversity / math::gamma(1.0 - alpha),
            tail_mass,
        };
        real.validate()?;
        Ok(real)
    }

    fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.theta.is_finite() && self.theta > -self.alpha) {
            return Err(Error::Theta {
                alpha: self.alpha,
                theta: self.theta,
            });
        }
        if self.freqs.is_empty() || self.truncation_level != self.freqs.len() {
            return Err(Error::domain("freqs", "length must equal truncation_level >= 1"));
        }
        if let Some(i) = self.freqs.iter().position(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::ZeroFrequency { index: i });
        }
        if self.freqs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain("freqs", "must be nonincreasing"));
        }
        let sum = math::pairwise_sum(&self.freqs);
        if sum > 1.0 + 1e-9 {
            return Err(Error::domain("freqs", "sum exceeds one"));
        }
        if !(self.tail_mass >= 0.0 && (sum + self.tail_mass - 1.0).abs() < 1e-9) {
            return Err(Error::domain("tail_mass", "must equal 1 - sum(freqs)"));
        }
        if !(self.diversity > 0.0 && self.diversity.is_finite()) {
            return Err(Error::domain("diversity", "must be positive and finite"));
        }
        let expected_d = self.diversity / math::gamma(1.0 - self.alpha);
        if (self.d_const - expected_d).abs() > 1e-12 * expected_d {
            return Err(Error::domain("d_const", "must equal diversity / Γ(1-α)"));
        }
        if let Some(arrivals) = &self.arrivals {
            if arrivals.len() != self.freqs.len() {
                return Err(Error::domain("arrivals", "length must match freqs"));
            }
            let d_root = math::pow(self.d_const, 1.0 / self.alpha);
            for (g, p) in arrivals.iter().zip(&self.freqs) {
                let implied = d_root * math::pow(*g, -1.0 / self.alpha);
                if (implied - p).abs() > 1e-9 * p {
                    return Err(Error::domain("arrivals", "inconsistent with freqs"));
                }
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn arrivals(&self) -> Option<&[f64]> {
        self.arrivals.as_deref()
    }

    /// `P_1↓ ≥ P_2↓ ≥ …`, excluding the tail.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// α-diversity `S_α`.
    pub fn diversity(&self) -> f64 {
        self.diversity
    }

    /// `D = S_α / Γ(1−α)`.
    pub fn d_const(&self) -> f64 {
        self.d_const
    }

    pub fn truncation_level(&self) -> usize {
        self.truncation_level
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Cell masses used for urn sampling: the frequencies followed by a
    /// single reservoir cell holding the tail, when the tail is nonzero.
    pub fn cell_masses(&self) -> impl Iterator<Item = f64> + '_ {
        let tail = (self.tail_mass > 0.0).then_some(self.tail_mass);
        self.freqs.iter().copied().chain(tail)
    }
}

/// Expected tail mass proxy at level `j`, with `Γ̃_k` replaced by `k`.
fn tail_proxy(alpha: f64, j: f64, zeta: f64) -> f64 {
    alpha / (1.0 - alpha) * math::pow(j, 1.0 - 1.0 / alpha) / zeta
}

/// `ζ(1/α) = Σ_k k^{−1/α}` by direct summation plus an Euler–Maclaurin tail.
fn zeta_inverse_alpha(alpha: f64) -> f64 {
    let s = 1.0 / alpha;
    let m = 1000u32;
    let head: f64 = (1..=m).map(|k| math::pow(k as f64, -s)).sum();
    let mf = m as f64;
    head + math::pow(mf, 1.0 - s) / (s - 1.0) - 0.5 * math::pow(mf, -s)
        + s / 12.0 * math::pow(mf, -s - 1.0)
}

/// Smallest truncation level whose expected tail mass is at most
/// `tolerance / 2`.
pub fn default_truncation(alpha: f64, tolerance: f64) -> Result<usize> {
    check_alpha(alpha)?;
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::domain("tolerance", "must lie in (0, 1)"));
    }
    let zeta = zeta_inverse_alpha(alpha);
    let target = 0.5 * tolerance;
    // tail_proxy is decreasing in j; solve tail_proxy(j) = target
    let j = math::pow(target * zeta * (1.0 - alpha) / alpha, 1.0 / (1.0 - 1.0 / alpha));
    if !(j.is_finite() && j <= MAX_TRUNCATION as f64) {
        return Err(Error::TruncationCap {
            alpha,
            tolerance,
            cap: MAX_TRUNCATION,
        });
    }
    let mut j = (libm::ceil(j) as usize).max(1);
    while j > 1 && tail_proxy(alpha, (j - 1) as f64, zeta) <= target {
        j -= 1;
    }
    while tail_proxy(alpha, j as f64, zeta) > target {
        j += 1;
    }
    Ok(j)
}

/// Draws `PD(α, 0)` frequencies from the first `j` Poisson arrival times
/// with integral tail completion.
pub fn sample_pd_theta0(alpha: f64, j: usize, seed: u64) -> Result<FrequencyRealization> {
    sample_pd_theta0_with(alpha, &PdOptions::fixed(j), &mut rng::rng_from_seed(seed))
}

/// Arrival times are cumulative sums of `Exp(1)` draws, one uniform each.
pub fn sample_pd_theta0_with<R: RngCore + ?Sized>(
    alpha: f64,
    options: &PdOptions,
    rng: &mut R,
) -> Result<FrequencyRealization> {
    check_alpha(alpha)?;
    let j = match options.truncation {
        Truncation::Fixed(0) => return Err(Error::domain("truncation", "must be at least 1")),
        Truncation::Fixed(j) => j,
        Truncation::Auto => {
            default_truncation(alpha, options.max_tail_mass.unwrap_or(DEFAULT_TAIL_TOLERANCE))?
        }
    };
    let mut arrivals = Vec::with_capacity(j);
    let mut t = 0.0;
    for _ in 0..j {
        t += rng::exp1(rng);
        arrivals.push(t);
    }
    let real = FrequencyRealization::from_arrivals(alpha, arrivals, options.tail)?;
    if let Some(tolerance) = options.max_tail_mass {
        if real.tail_mass > tolerance {
            return Err(Error::Truncation {
                requested: j,
                tail_mass: real.tail_mass,
                tolerance,
            });
        }
    }
    Ok(real)
}

/// Size-biased frequencies from stick breaking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GemRealization {
    pub alpha: f64,
    pub theta: f64,
    /// `V_1, …, V_J`.
    pub sticks: Vec<f64>,
    /// `P_j = V_j Π_{k<j} (1 − V_k)`.
    pub freqs: Vec<f64>,
}

impl GemRealization {
    /// Unbroken stick `Π_{k≤J} (1 − V_k)`.
    pub fn residual(&self) -> f64 {
        math::exp(math::pairwise_sum_by(&self.sticks, &|v| math::log1p(-v)))
    }

    /// `E[S_α | V_1, …, V_J] = R_J^α E_{α, θ+Jα}[S_α]`.
    ///
    /// The sticks after the `J`-th are those of `GEM(α, θ+Jα)` and scale by
    /// `R_J`, so `S_α = R_J^α S'_α` with `S'_α` independent of the first `J`
    /// sticks. Unbiased for `E[S_α]`; close to `J^{1−α}(R_J/α)^α` for large `J`.
    pub fn diversity_estimate(&self) -> f64 {
        let j = self.sticks.len() as f64;
        let a = self.alpha;
        let theta = self.theta + j * a;
        let remainder_mean = math::exp(math::ln_gamma(theta + 1.0) - math::ln_gamma(theta + a + 1.0))
            * (theta / a + 1.0);
        math::pow(self.residual(), a) * remainder_mean
    }

    /// Sorts the frequencies decreasingly; the residual becomes the tail and
    /// the diversity is [`Self::diversity_estimate`]. Underflowed zero
    /// frequencies are dropped.
    pub fn to_ordered(&self) -> Result<FrequencyRealization> {
        let mut freqs: Vec<f64> = self.freqs.iter().copied().filter(|&p| p > 0.0).collect();
        freqs.sort_unstable_by(|a, b| b.total_cmp(a));
        FrequencyRealization::from_parts(self.alpha, self.theta, freqs, self.diversity_estimate())
    }
}

pub fn sample_gem(alpha: f64, theta: f64, j: usize, seed: u64) -> Result<GemRealization> {
    sample_gem_with(alpha, theta, j, &mut rng::rng_from_seed(seed))
}

/// Stick `V_k ~ Beta(1−α, θ+kα)` for `k = 1..=j`, each drawn as two gammas.
pub fn sample_gem_with(alpha: f64, theta: f64, j: usize, rng: &mut SimRng) -> Result<GemRealization> {
    crate::partitions::CrpParams::new(alpha, theta)?;
    if j == 0 {
        return Err(Error::domain("j", "must be at least 1"));
    }
    let mut sticks = Vec::with_capacity(j);
    let mut freqs = Vec::with_capacity(j);
    let mut remaining = 1.0;
    for k in 1..=j {
        let v = rng::beta(rng, 1.0 - alpha, theta + k as f64 * alpha);
        sticks.push(v);
        freqs.push(v * remaining);
        remaining *= 1.0 - v;
    }
    Ok(GemRealization {
        alpha,
        theta,
        sticks,
        freqs,
    })
}

/// `Γ_j = D (P_j↓)^{−α}`.
pub fn gamma_from_freqs(real: &FrequencyRealization) -> Result<Vec<f64>> {
    let d = real.d_const;
    real.freqs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p > 0.0 {
                Ok(d * math::pow(p, -real.alpha))
            } else {
                Err(Error::ZeroFrequency { index: i })
            }
        })
        .collect()
}

/// `D_n = (Σ_{j: Γ_j ≤ ε n^α} Γ_j^{−1/α})^{−α}`.
pub fn truncated_d(real: &FrequencyRealization, epsilon: f64, n: u64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon", "must be positive"));
    }
    truncated_d_window(real, epsilon * math::pow(n as f64, real.alpha))
}

/// `D_n` for an explicit window `[0, window]` on the arrival scale.
pub fn truncated_d_window(real: &FrequencyRealization, window: f64) -> Result<f64> {
    // Γ_j increases with j, so only the prefix inside the window is needed
    let mut gammas = Vec::new();
    for (i, &p) in real.freqs.iter().enumerate() {
        if !(p > 0.0) {
            return Err(Error::ZeroFrequency { index: i });
        }
        let g = real.d_const * math::pow(p, -real.alpha);
        if g > window {
            break;
        }
        gammas.push(g);
    }
    let count = gammas.len();
    if count == 0 {
        return Err(Error::EmptyWindow { window });
    }
    let sum = math::pairwise_sum_by(&gammas[..count], &|g| math::pow(*g, -1.0 / real.alpha));
    Ok(math::pow(sum, -real.alpha))
}

/// Default window schedule `ε_n = c / log log n`.
pub fn epsilon_schedule(n: u64, c: f64) -> Result<f64> {
    if n < 16 {
        return Err(Error::domain("n", "schedule needs n >= 16"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain("c", "must be positive"));
    }
    Ok(c / math::log(math::log(n as f64)))
}

/// Density `Γ(θ+1)/Γ(θ/α+1) S_α^{θ/α}` of `PD(α, θ)` against `PD(α, 0)`.
pub fn importance_weight(s_alpha: f64, alpha: f64, theta: f64) -> Result<f64> {
    crate::partitions::CrpParams::new(alpha, theta)?;
    if !(s_alpha > 0.0 && s_alpha.is_finite()) {
        return Err(Error::domain("s_alpha", "must be positive"));
    }
    if theta == 0.0 {
        return Ok(1.0);
    }
    let r = theta / alpha;
    Ok(math::exp(
        math::ln_gamma(theta + 1.0) - math::ln_gamma(r + 1.0) + r * math::log(s_alpha),
    ))
}

/// `E[S_α^p] = Γ(p+1)/Γ(pα+1)` under `PD(α, 0)` (Mittag-Leffler moments).
pub fn mittag_leffler_moment(alpha: f64, p: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(p > -1.0) {
        return Err(Error::domain("p", "moment order must exceed -1"));
    }
    Ok(math::exp(math::ln_gamma(p + 1.0) - math::ln_gamma(p * alpha + 1.0)))
}

/// `E[S_α]` under `PD(α, θ)`: `Γ(θ+1)(θ/α+1)/Γ(θ+α+1)`.
pub fn expected_diversity(alpha: f64, theta: f64) -> Result<f64> {
    crate::partitions::CrpParams::new(alpha, theta)?;
    Ok(math::exp(math::ln_gamma(theta + 1.0) - math::ln_gamma(theta + alpha + 1.0))
        * (theta / alpha + 1.0))
}
