//! Behavior of the tests under null data, across many seeds.

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use xssd_core::seed::derive_index;
use xssd_core::{
    alignment_test, bootstrap_interval, corrected_t_test, difference_test, JoinedSample,
};

fn sample(n: usize, d: usize, signal: f64, seed: u64) -> JoinedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let y = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            signal * x[[i, 0]] + e
        })
        .collect();
    let words = (0..n).map(|i| format!("w{i}")).collect();
    JoinedSample::new("a", "valence", words, x, y).unwrap()
}

#[test]
fn t_test_rarely_rejects_pure_noise() {
    let mut rejections = 0;
    for run in 0..100 {
        let s = sample(120, 5, 0.0, run);
        let report = corrected_t_test(s.x.view(), &s.y, 1, 30, 0.2, derive_index(7, run)).unwrap();
        rejections += usize::from(report.p_value < 0.05);
    }
    assert!(rejections <= 10, "{rejections}/100 rejections");
}

#[test]
fn alignment_p_values_are_roughly_uniform_under_the_null() {
    let mut below = [0usize; 2];
    for run in 0..200 {
        let a = sample(60, 4, 0.0, 1000 + run);
        let b = sample(60, 4, 0.0, 5000 + run);
        let p = alignment_test(&a, &b, 99, run).unwrap().p_value;
        below[0] += usize::from(p <= 0.1);
        below[1] += usize::from(p <= 0.5);
    }
    assert!((8..=35).contains(&below[0]), "{below:?}");
    assert!((75..=125).contains(&below[1]), "{below:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permutation_p_values_sit_on_the_grid(seed in 0u64..1000, n in 9usize..60) {
        let a = sample(40, 3, 1.0, seed);
        let b = sample(40, 3, 1.0, seed + 1);
        for p in [
            alignment_test(&a, &b, n, seed).unwrap().p_value,
            difference_test(&a, &b, n, seed).unwrap().p_value,
        ] {
            let count = p * (n + 1) as f64;
            prop_assert!(p >= 1.0 / (n + 1) as f64 && p <= 1.0);
            prop_assert!((count - count.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn bootstrap_interval_brackets_and_stays_inside(seed in 0u64..1000, signal in 0.0f64..3.0) {
        let a = sample(40, 3, signal, seed);
        let b = sample(40, 3, signal, seed + 7);
        let r = bootstrap_interval(&a, &b, 100, seed).unwrap();
        prop_assert!(r.ci_low <= r.rho_observed && r.rho_observed <= r.ci_high);
        prop_assert!(r.ci_low > -1.0 && r.ci_high < 1.0);
    }
}
