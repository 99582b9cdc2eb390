//! Floating-point helpers.
//!
//! Everything goes through `libm`, which is pure Rust and gives the same bits
//! on every platform; the determinism contract of the simulators relies on it.

pub use libm::{exp, expm1, fabs, floor, log, log1p, pow, sqrt};

pub const PI: f64 = core::f64::consts::PI;

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Two-sided upper tail `P(|Z| > |z|)` of a standard normal.
pub fn normal_two_sided(z: f64) -> f64 {
    libm::erfc(fabs(z) / core::f64::consts::SQRT_2)
}

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how a caller chunked the work.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for &v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Pairwise sum of `f(x)` over `values` without allocating.
pub fn pairwise_sum_by<T>(values: &[T], f: &impl Fn(&T) -> f64) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += f(v);
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum_by(&values[..mid], f) + pairwise_sum_by(&values[mid..], f)
    }
}

/// `⌊n t⌋` for `t ∈ [0, 1]`, with a half-ulp upward nudge so that products
/// such as `100 * 0.29` land on the integer they represent.
pub fn floor_index(n: u64, t: f64) -> u64 {
    let x = n as f64 * t;
    let m = floor(x + x * f64::EPSILON * 0.5);
    if m <= 0.0 {
        0
    } else {
        (m as u64).min(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma(0.5) - sqrt(PI)).abs() < 1e-14);
        assert!((ln_gamma(10.0) - log(362880.0)).abs() < 1e-12);
    }

    #[test]
    fn floor_index_handles_representation_error() {
        assert_eq!(floor_index(100, 0.29), 29);
        assert_eq!(floor_index(100, 0.57), 57);
        assert_eq!(floor_index(10_000, 1.0), 10_000);
        assert_eq!(floor_index(7, 0.5), 3);
        assert_eq!(floor_index(5, 0.0), 0);
        for i in 0..=1000u64 {
            assert_eq!(floor_index(1000, i as f64 / 1000.0), i);
        }
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: std::vec::Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 49_995_000.0);
        assert_eq!(pairwise_sum_by(&v, &|x| 2.0 * x), 99_990_000.0);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.975002104851780).abs() < 1e-12);
        assert!((normal_two_sided(2.5758293035489) - 0.01).abs() < 1e-10);
    }
}
