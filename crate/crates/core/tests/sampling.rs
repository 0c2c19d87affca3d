//! Distributional checks of the sampler, with the Kolmogorov–Smirnov oracle
//! written out here.

use std::f64::consts::TAU;

use proptest::prelude::*;
use steinhaus::sequences::{dyadic_counts, sample_sequence, CountRule, RadiusProfile};

/// KS statistic of `values` against the uniform law on `[0, 1)`.
fn ks_statistic(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

/// Asymptotic p-value `Q_KS((√n + 0.12 + 0.11/√n) D)`.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut q = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        q += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    q.clamp(0.0, 1.0)
}

#[test]
fn ks_oracle_sanity() {
    // evenly spread points are as uniform as it gets
    let mut grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    assert!(ks_p_value(ks_statistic(&mut grid), 1000) > 0.99);
    // squared uniforms are far from uniform
    let mut skewed: Vec<f64> = (0..1000).map(|i| ((i as f64 + 0.5) / 1000.0).powi(2)).collect();
    assert!(ks_p_value(ks_statistic(&mut skewed), 1000) < 1e-6);
}

#[test]
fn angles_within_a_sample_are_uniform() {
    let profile = RadiusProfile::geometric(0.9, 10_000).unwrap();
    for seed in [1, 2] {
        let s = sample_sequence(&profile, seed);
        let mut u: Vec<f64> = s.points.iter().map(|z| z.angle() / TAU).collect();
        let p = ks_p_value(ks_statistic(&mut u), u.len());
        assert!(p > 1e-3, "seed {seed}: p = {p}");
    }
}

#[test]
fn first_angle_across_seeds_is_uniform() {
    // c < 1 keeps the first point off the origin, whose angle is pinned to 0
    let profile = RadiusProfile::power(0.5, 2.0, 3).unwrap();
    let mut u: Vec<f64> = (0..1000).map(|seed| sample_sequence(&profile, seed).points[0].angle() / TAU).collect();
    let p = ks_p_value(ks_statistic(&mut u), u.len());
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn empty_profile_gives_empty_sample() {
    let s = sample_sequence(&RadiusProfile::geometric(0.5, 0).unwrap(), 4);
    assert!(s.is_empty());
    let d = dyadic_counts(&s.points);
    assert!(d.counts.is_empty());
    assert_eq!(d.weighted_sum, 0.0);
}

#[test]
fn prefixes_are_shared_between_truncations() {
    let long = sample_sequence(&RadiusProfile::power(2.0, 1.5, 500).unwrap(), 77);
    let short = sample_sequence(&RadiusProfile::power(2.0, 1.5, 120).unwrap(), 77);
    assert_eq!(&long.points[..120], &short.points[..]);
    assert_eq!(long.truncated(120), short);
}

fn arb_profile() -> impl Strategy<Value = RadiusProfile> {
    prop_oneof![
        (0.05f64..0.95, 1usize..400).prop_map(|(q, n)| RadiusProfile::geometric(q, n).unwrap()),
        (0.1f64..3.0, 0.3f64..3.0, 1usize..400).prop_map(|(c, b, n)| RadiusProfile::power(c, b, n).unwrap()),
        (1usize..400).prop_map(|n| RadiusProfile::dyadic(CountRule::Linear, n).unwrap()),
        (1.1f64..2.5, 1usize..400).prop_map(|(b, n)| RadiusProfile::dyadic(CountRule::Exponential(b), n).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blaschke_sums_are_comparable(profile in arb_profile(), seed in any::<u64>()) {
        let s = sample_sequence(&profile, seed);
        prop_assert_eq!(s.len(), profile.count());
        let d = dyadic_counts(&s.points);
        prop_assert_eq!(d.total() as usize, s.len());
        let tol = 1e-12 * d.weighted_sum;
        prop_assert!(0.5 * d.weighted_sum <= d.blaschke_sum + tol);
        prop_assert!(d.blaschke_sum <= d.weighted_sum + tol);
    }

    #[test]
    fn samples_are_reproducible(profile in arb_profile(), seed in any::<u64>()) {
        let a = sample_sequence(&profile, seed);
        let b = sample_sequence(&profile, seed);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert!(a.points.iter().all(|z| z.log_depth() <= 0.0 && z.log_depth().is_finite() && (0.0..TAU).contains(&z.angle())));
    }
}
