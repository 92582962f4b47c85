mod common;

use common::*;
use ela_core::market_data::{DatasetRow, RoundDataset};
use ela_core::mle::{
    loglog_view, normal_log_cdf, normal_log_density, t_log_cdf, t_log_density, LogBidBase,
    DEFAULT_LOG_FLOOR,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NUS: [f64; 9] = [0.3, 0.7, 1.0, 1.3, 2.5, 5.0, 12.0, 30.0, 200.0];

#[test]
fn quadrature_normalizes_known_constants() {
    // Cauchy: integral of 1/(1+x^2) is pi.
    let z = sinh_sinh(|x| 1.0 / (1.0 + x * x));
    assert!((z - std::f64::consts::PI).abs() < 1e-13);
    let g = sinh_sinh(|x| (-0.5 * x * x).exp());
    assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-13);
}

#[test]
fn t_density_matches_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &nu in &NUS {
        let norm = t_log_norm_quadrature(nu);
        for _ in 0..25 {
            let x: f64 = rng.random_range(-50.0..50.0);
            let oracle = t_kernel_log(x, nu) + norm;
            let got = t_log_density(x, nu).unwrap();
            assert!(
                (got - oracle).abs() < 1e-10,
                "nu={nu} x={x}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn t_cdf_matches_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &nu in &NUS {
        for _ in 0..12 {
            let x: f64 = rng.random_range(-40.0..40.0);
            let oracle = t_log_cdf_oracle(x, nu);
            let got = t_log_cdf(x, nu).unwrap();
            assert!(
                (got - oracle).abs() < 1e-9,
                "nu={nu} x={x}: {got} vs {oracle}"
            );
        }
        for x in [-1e4, -300.0, -3.0, -0.1, 0.0, 0.1, 3.0, 300.0] {
            let oracle = t_log_cdf_oracle(x, nu);
            let got = t_log_cdf(x, nu).unwrap();
            if oracle == f64::NEG_INFINITY {
                // Below the smallest double; only the log stays representable.
                assert!(got.is_finite() && got < -700.0);
                continue;
            }
            assert!(
                (got - oracle).abs() < 1e-9,
                "nu={nu} x={x}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn normal_matches_quadrature_oracle() {
    let norm = normal_log_norm_quadrature();
    for i in 0..=80 {
        let x = -30.0 + 0.75 * i as f64;
        assert!((normal_log_density(x) - (-0.5 * x * x + norm)).abs() < 1e-10);
        let oracle = normal_log_cdf_oracle(x);
        let got = normal_log_cdf(x);
        assert!(
            (got - oracle).abs() < 1e-9 * (1.0 + oracle.abs()),
            "x={x}: {got} vs {oracle}"
        );
    }
}

#[test]
fn loglog_view_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let rows: Vec<DatasetRow> = (0..200)
        .map(|i| DatasetRow {
            round_id: i,
            bidder: "0x1".into(),
            bid_scaled: rng.random_range(1.0..1e4),
            censored: false,
            x1: rng.random_range(1e-3..1e3),
            x2: rng.random_range(1e-6..1e6),
            p_start: 3000.0,
            round_start_ms: 0,
        })
        .collect();
    let data = RoundDataset::new(rows);
    let v = loglog_view(&data, 1.0, DEFAULT_LOG_FLOOR, LogBidBase::Wei).unwrap();
    for (i, r) in data.rows.iter().enumerate() {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(v.response[i].exp() / 1e15, r.bid_scaled) < 1e-12);
        assert!(rel(v.x1[i].exp(), r.x1) < 1e-12);
        assert!(rel(v.x2[i].exp(), r.x2) < 1e-12);
    }
    assert!((v.censor_point - 15.0 * 10f64.ln()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn t_cdf_is_monotone_and_symmetric(nu in 0.2f64..50.0, a in -100.0f64..100.0, b in -100.0f64..100.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(t_log_cdf(lo, nu).unwrap() <= t_log_cdf(hi, nu).unwrap() + 1e-15);
        let left = t_log_cdf(-a, nu).unwrap().exp();
        let right = t_log_cdf(a, nu).unwrap().exp();
        prop_assert!((left + right - 1.0).abs() < 1e-13);
    }

    #[test]
    fn t_density_is_symmetric_and_below_peak(nu in 0.2f64..50.0, x in -1e3f64..1e3) {
        let f = t_log_density(x, nu).unwrap();
        prop_assert_eq!(f, t_log_density(-x, nu).unwrap());
        prop_assert!(f <= t_log_density(0.0, nu).unwrap());
    }
}

#[test]
fn large_nu_matches_high_precision_reference() {
    // (nu, x, log F, log f) computed at 40 significant digits.
    let table = [
        (
            1e5,
            -200.0,
            -16829.66087834002643079,
            -16824.6990082121618044,
        ),
        (
            1e5,
            -8.0,
            -35.00288385070031627763,
            -32.90902529781893024213,
        ),
        (
            1e5,
            2.0,
            -0.02301429053304477086127,
            -2.918921033871318034151,
        ),
        (
            1e9,
            -40.0,
            -804.6078012146858502251,
            -800.9182993341366985899,
        ),
        (
            1e9,
            -1.5,
            -2.705944398461127013397,
            -2.043938533314047742413,
        ),
        (
            1e9,
            0.3,
            -0.481410161638939009951,
            -0.9639385334976477384478,
        ),
        (
            1e13,
            -200.0,
            -20006.21724089619053376,
            -20000.9188985352048044,
        ),
        (
            1e13,
            -0.1,
            -0.7761545927302711474638,
            -0.9239385332046982398354,
        ),
        (
            1e13,
            9.0,
            -1.128588406143502470211e-19,
            -41.41893853304472274178,
        ),
    ];
    for (nu, x, cdf, pdf) in table {
        let got = t_log_cdf(x, nu).unwrap();
        assert!(
            (got - cdf).abs() <= 1e-10 * cdf.abs(),
            "cdf nu={nu} x={x}: {got} vs {cdf}"
        );
        let got = t_log_density(x, nu).unwrap();
        assert!(
            (got - pdf).abs() <= 1e-12 * pdf.abs().max(1.0),
            "pdf nu={nu} x={x}: {got} vs {pdf}"
        );
    }
}

#[test]
fn t_cdf_is_continuous_in_nu() {
    // Pairs straddling each decade from 1e4 up; any switch of method shows as a jump.
    for x in [-60.0, -3.0, -0.2, 1.0, 7.0] {
        for e in 4..16 {
            let nu = 10f64.powi(e);
            let lo = t_log_cdf(x, nu * (1.0 - 1e-10)).unwrap();
            let hi = t_log_cdf(x, nu * (1.0 + 1e-10)).unwrap();
            assert!(
                (hi - lo).abs() <= 1e-9 * lo.abs(),
                "x={x} nu={nu}: {lo} vs {hi}"
            );
        }
        let far = t_log_cdf(x, 1e300).unwrap();
        let limit = normal_log_cdf(x);
        assert!(
            (far - limit).abs() <= 1e-12 * limit.abs(),
            "x={x}: {far} vs {limit}"
        );
    }
}
