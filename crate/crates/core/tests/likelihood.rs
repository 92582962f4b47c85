mod common;

use common::*;
use ela_core::mle::{tobit_loglik, ErrorFamily, Form, Regressors, TobitDesign, TobitSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const COMBOS: [(Form, ErrorFamily); 4] = [
    (Form::Linear, ErrorFamily::StudentT),
    (Form::Linear, ErrorFamily::Gaussian),
    (Form::LogLog, ErrorFamily::StudentT),
    (Form::LogLog, ErrorFamily::Gaussian),
];

#[test]
fn matches_straight_line_oracle_for_every_form_and_family() {
    let data = random_rows(21, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for (form, family) in COMBOS {
        for regressors in [Regressors::Reduced, Regressors::Full] {
            let spec = TobitSpec::new(form, family, regressors);
            for _ in 0..3 {
                let params = random_params(&mut rng, &spec);
                let got = tobit_loglik(&params, &data, &spec).unwrap();
                let oracle = loglik_oracle(&params, &data, &spec);
                assert!(
                    (got - oracle).abs() < 1e-10,
                    "{form:?} {family:?} {regressors:?}: {got} vs {oracle}"
                );
            }
        }
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let data = random_rows(23, 300);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for (form, family) in COMBOS {
        let spec = TobitSpec::new(form, family, Regressors::Full);
        let design = TobitDesign::new(&data, &spec).unwrap();
        for _ in 0..5 {
            let v = random_params(&mut rng, &spec).to_vector(&spec);
            let (_, g) = design.loglik_grad(&v);
            let fd = numeric_grad(&design, &v);
            assert!(
                max_rel_diff(&g, &fd, 1e-2) <= 1e-5,
                "{form:?} {family:?}: {g:?} vs {fd:?}"
            );
        }
    }
}

#[test]
fn likelihood_at_value_matches_gradient_pass() {
    let data = random_rows(25, 500);
    let spec = TobitSpec::new(Form::Linear, ErrorFamily::StudentT, Regressors::Full);
    let design = TobitDesign::new(&data, &spec).unwrap();
    let params = random_params(&mut ChaCha8Rng::seed_from_u64(26), &spec);
    let (ll, _) = design.loglik_grad(&params.to_vector(&spec));
    let direct = design.loglik(&params).unwrap();
    assert!((ll - direct).abs() <= 1e-9 * direct.abs());
}

#[test]
fn evaluation_is_bit_reproducible() {
    let data = random_rows(27, 20_000);
    let spec = TobitSpec::new(Form::LogLog, ErrorFamily::StudentT, Regressors::Full);
    let params = random_params(&mut ChaCha8Rng::seed_from_u64(28), &spec);
    let a = tobit_loglik(&params, &data, &spec).unwrap();
    for _ in 0..5 {
        assert_eq!(
            a.to_bits(),
            tobit_loglik(&params, &data, &spec).unwrap().to_bits()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn likelihood_is_additive_over_row_partitions(seed in 0u64..1000, cut in 1usize..99, combo in 0usize..4) {
        let data = random_rows(seed, 100);
        let (form, family) = COMBOS[combo];
        let spec = TobitSpec::new(form, family, Regressors::Full);
        let params = random_params(&mut ChaCha8Rng::seed_from_u64(seed + 1), &spec);
        let mut rows = data.rows.clone();
        rows.rotate_left(seed as usize % 100);
        let (a, b) = rows.split_at(cut);
        let whole = tobit_loglik(&params, &data, &spec).unwrap();
        let parts = tobit_loglik(&params, &ela_core::RoundDataset::new(a.to_vec()), &spec).unwrap()
            + tobit_loglik(&params, &ela_core::RoundDataset::new(b.to_vec()), &spec).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-10 * whole.abs().max(1.0));
    }
}

#[test]
fn overflowing_nu_is_outside_the_domain() {
    let data = random_rows(29, 50);
    let spec = TobitSpec::new(Form::Linear, ErrorFamily::StudentT, Regressors::Full);
    let design = TobitDesign::new(&data, &spec).unwrap();
    let mut v = random_params(&mut ChaCha8Rng::seed_from_u64(30), &spec).to_vector(&spec);
    *v.last_mut().unwrap() = 800.0;
    let (ll, g) = design.loglik_grad(&v);
    assert!(ll.is_nan());
    assert_eq!(g.len(), v.len());
}

#[test]
fn huge_nu_approaches_the_gaussian_likelihood() {
    // The gap to the Gaussian likelihood is first order in 1/nu.
    let data = random_rows(31, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let t_spec = TobitSpec::new(Form::Linear, ErrorFamily::StudentT, Regressors::Full);
    let g_spec = TobitSpec::new(Form::Linear, ErrorFamily::Gaussian, Regressors::Full);
    for _ in 0..3 {
        let mut params = random_params(&mut rng, &t_spec);
        params.nu = None;
        let gauss = tobit_loglik(&params, &data, &g_spec).unwrap();
        let gap = |params: &mut ela_core::mle::TobitParams, nu: f64| {
            params.nu = Some(nu);
            tobit_loglik(params, &data, &t_spec).unwrap() - gauss
        };
        let base = gap(&mut params, 1e8) * 1e8;
        for nu in [1e10, 1e12, 1e14] {
            let scaled = gap(&mut params, nu) * nu;
            assert!(
                (scaled - base).abs() <= 0.01 * base.abs(),
                "nu={nu}: {scaled} vs {base}"
            );
        }
    }
}
