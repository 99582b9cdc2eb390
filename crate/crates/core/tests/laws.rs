//! Monte Carlo checks of distributional identities across modules.

use ewens_pitman_core::frequencies::{
    mittag_leffler_moment, sample_gem, sample_pd_theta0,
};
use ewens_pitman_core::math;
use ewens_pitman_core::partitions::simulate_crp;
use ewens_pitman_core::rng::derive_seed;
use ewens_pitman_core::stats::{ks_two_sample, moment_estimates};
use ewens_pitman_core::urn::poissonized_run;
use ewens_pitman_core::{CrpParams, Grid};

#[test]
fn sorted_gem_and_arrival_route_agree_on_largest_frequency() {
    let alpha = 0.5;
    let batches = 40u64;
    let per_batch = 400u64;
    let mut accepted = 0;
    for b in 0..batches {
        let gem: Vec<f64> = (0..per_batch)
            .map(|r| {
                let g = sample_gem(alpha, 0.0, 2000, derive_seed(100 + b, r)).unwrap();
                g.freqs.iter().copied().fold(0.0, f64::max)
            })
            .collect();
        let pd: Vec<f64> = (0..per_batch)
            .map(|r| sample_pd_theta0(alpha, 2000, derive_seed(900 + b, r)).unwrap().freqs()[0])
            .collect();
        if ks_two_sample(&gem, &pd).unwrap().p_value > 0.01 {
            accepted += 1;
        }
    }
    assert!(accepted as f64 >= 0.95 * batches as f64, "{accepted}/{batches}");
}

#[test]
fn crp_counts_follow_the_diversity_law() {
    let (alpha, n, reps) = (0.5, 10_000u64, 2000u64);
    let params = CrpParams::new(alpha, 0.0).unwrap();
    let scaled: Vec<f64> = (0..reps)
        .map(|r| simulate_crp(n, params, derive_seed(5, r)).unwrap().k_final() as f64 / math::pow(n as f64, alpha))
        .collect();
    let m = moment_estimates(&scaled, None).unwrap();
    let oracle = 1.0 / math::gamma(1.0 + alpha);
    assert!((m.mean - oracle).abs() < 4.0 * m.se_mean, "{} vs {oracle}", m.mean);

    // the same moment from the independent frequency sampler
    let s: Vec<f64> = (0..reps)
        .map(|r| sample_pd_theta0(alpha, 5000, derive_seed(6, r)).unwrap().diversity())
        .collect();
    let ms = moment_estimates(&s, None).unwrap();
    assert!((ms.mean - mittag_leffler_moment(alpha, 1.0).unwrap()).abs() < 4.0 * ms.se_mean);
    let combined = (m.se_mean.powi(2) + ms.se_mean.powi(2)).sqrt();
    assert!((m.mean - ms.mean).abs() < 4.0 * combined);
    // second moments agree as well: Var(S) = 2/Γ(1+2α) − 1/Γ(1+α)²
    let var = mittag_leffler_moment(alpha, 2.0).unwrap() - oracle * oracle;
    assert!((ms.variance - var).abs() < 4.0 * ms.se_variance, "{} vs {var}", ms.variance);
}

#[test]
fn time_change_is_close_to_identity() {
    let grid = Grid::uniform(100);
    let n = 10_000;
    let runs = 200u64;
    let mut within = 0;
    for r in 0..runs {
        let real = sample_pd_theta0(0.5, 20_000, derive_seed(77, r)).unwrap();
        let run = poissonized_run(&real, n, &grid, derive_seed(78, r)).unwrap();
        assert_eq!(run.k_tilde(0.0).unwrap(), 0);
        assert_eq!(run.lambda_times[0], 0.0);
        if run.max_time_change_error() < 0.05 {
            within += 1;
        }
    }
    assert!(within as f64 >= 0.99 * runs as f64, "{within}/{runs}");
}
