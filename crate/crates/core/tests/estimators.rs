mod common;

use common::{newey_west_oracle, return_window as window};
use ela_core::vol::{newey_west_raw, newey_west_var_iv, realized_variance, sq_return_autocov};
use proptest::prelude::*;

#[test]
fn newey_west_matches_double_loop_on_200_windows() {
    let mut worst = 0.0f64;
    for seed in 0..200 {
        let r = window(seed, 60);
        let got = newey_west_raw(&r, 60, 5).unwrap();
        let oracle = newey_west_oracle(&r, 5);
        worst = worst.max(((got - oracle) / oracle).abs());
    }
    assert!(worst < 1e-12, "worst relative error {worst:e}");
}

#[test]
fn newey_west_matches_oracle_across_lags() {
    for lags in [0usize, 1, 3, 10, 30] {
        let r = window(1000 + lags as u64, 60);
        let got = newey_west_raw(&r, 60, lags).unwrap();
        let oracle = newey_west_oracle(&r, lags);
        assert!(((got - oracle) / oracle).abs() < 1e-12, "L={lags}");
    }
}

#[test]
fn realized_variance_is_exact_on_dyadic_returns() {
    let r = [0.5, -0.25, 0.125, 0.0, -1.0];
    assert_eq!(
        realized_variance(&r).unwrap(),
        0.25 + 0.0625 + 0.015625 + 1.0
    );
}

#[test]
fn autocovariance_at_lag_zero_is_population_variance_of_squares() {
    let r = [1.0, 2.0, 3.0, 4.0];
    // squares 1 4 9 16, mean 7.5
    let expected = (6.5f64.powi(2) + 3.5f64.powi(2) + 1.5f64.powi(2) + 8.5f64.powi(2)) / 4.0;
    assert_eq!(sq_return_autocov(&r, 0).unwrap(), expected);
}

#[test]
fn scale_equivariance_is_exact_for_powers_of_two() {
    for seed in 0..50 {
        let r = window(seed, 60);
        let rv = realized_variance(&r).unwrap();
        let nw = newey_west_raw(&r, 60, 5).unwrap();
        for e in [-3i32, -1, 1, 4] {
            let s = 2f64.powi(e);
            let scaled: Vec<f64> = r.iter().map(|x| x * s).collect();
            assert_eq!(realized_variance(&scaled).unwrap(), rv * s * s);
            assert_eq!(newey_west_raw(&scaled, 60, 5).unwrap(), nw * s.powi(4));
        }
    }
}

#[test]
fn constant_magnitude_returns_have_zero_long_run_variance() {
    let r: Vec<f64> = (0..60)
        .map(|i| if i % 3 == 0 { 1e-4 } else { -1e-4 })
        .collect();
    let (v, _) = newey_west_var_iv(&r, 60, 5).unwrap();
    assert!(v.abs() < 1e-30);
}

proptest! {
    #[test]
    fn estimates_are_nonnegative(seed in any::<u64>(), lags in 0usize..20) {
        let r = window(seed, 60);
        let (v, _) = newey_west_var_iv(&r, 60, lags).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(realized_variance(&r).unwrap() > 0.0);
    }

    #[test]
    fn estimates_ignore_return_signs(seed in any::<u64>(), flips in any::<u64>()) {
        let r = window(seed, 60);
        let flipped: Vec<f64> = r.iter().enumerate()
            .map(|(i, x)| if flips >> (i % 64) & 1 == 1 { -x } else { *x })
            .collect();
        prop_assert_eq!(realized_variance(&r).unwrap(), realized_variance(&flipped).unwrap());
        prop_assert_eq!(newey_west_raw(&r, 60, 5).unwrap(), newey_west_raw(&flipped, 60, 5).unwrap());
    }

    #[test]
    fn time_reversal_leaves_long_run_variance_unchanged(seed in any::<u64>()) {
        let r = window(seed, 60);
        let rev: Vec<f64> = r.iter().rev().copied().collect();
        let a = newey_west_raw(&r, 60, 5).unwrap();
        let b = newey_west_raw(&rev, 60, 5).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }
}
