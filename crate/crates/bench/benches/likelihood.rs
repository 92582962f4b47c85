use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ela_core::auction::{simulate_rounds, SimConfig};
use ela_core::mle::{
    fit_design, ErrorFamily, FitOptions, Form, Regressors, TobitDesign, TobitParams, TobitSpec,
};
use std::hint::black_box;

fn design(form: Form, family: ErrorFamily, n_rounds: usize) -> TobitDesign {
    let cfg = SimConfig {
        n_rounds,
        ..SimConfig::default()
    };
    let data = simulate_rounds(&cfg).unwrap().dataset;
    TobitDesign::new(&data, &TobitSpec::new(form, family, Regressors::Full)).unwrap()
}

fn start(spec: &TobitSpec) -> Vec<f64> {
    let theta = match spec.form {
        Form::Linear => vec![0.5, 0.3, -2.0],
        Form::LogLog => vec![35.0, 0.5, -0.1],
    };
    TobitParams {
        theta,
        gamma: vec![-0.5, 0.4, -0.1],
        nu: (spec.family == ErrorFamily::StudentT).then_some(3.0),
    }
    .to_vector(spec)
}

fn loglik(c: &mut Criterion) {
    let mut group = c.benchmark_group("loglik_grad");
    for (name, form, family) in [
        ("linear_t", Form::Linear, ErrorFamily::StudentT),
        ("linear_gauss", Form::Linear, ErrorFamily::Gaussian),
        ("loglog_t", Form::LogLog, ErrorFamily::StudentT),
    ] {
        let d = design(form, family, 20_000);
        let v = start(&d.spec);
        group.bench_function(name, |b| b.iter(|| black_box(d.loglik_grad(black_box(&v)))));
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let d = design(Form::Linear, ErrorFamily::StudentT, 5_000);
    let opts = FitOptions {
        starts: 1,
        std_errors: false,
        ..FitOptions::default()
    };
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("linear_t_5000", |b| {
        b.iter_batched(
            || d.clone(),
            |d| fit_design(&d, &opts).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, loglik, fit);
criterion_main!(benches);
