//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ela_core::market_data::{DatasetRow, RoundDataset};
use ela_core::mle::{ErrorFamily, Form, Regressors, TobitFit, TobitParams, TobitSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1.0 / 128.0;
const T_MAX: f64 = 6.5;

/// Double-exponential quadrature of `f` over `[0, b]` where `f` may be
/// singular at 0. `f` receives the distance from 0, computed without
/// cancellation near the endpoint.
pub fn tanh_sinh_from_zero(f: impl Fn(f64) -> f64, b: f64) -> f64 {
    let half = b / 2.0;
    let n = (T_MAX / H) as i64;
    let mut sum = 0.0;
    for k in -n..=n {
        let t = k as f64 * H;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        if w == 0.0 || !w.is_finite() {
            continue;
        }
        // 1 - tanh|u| = 2 / (exp(2|u|) + 1)
        let gap = 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let d = if t <= 0.0 { half * gap } else { b - half * gap };
        if d <= 0.0 {
            continue;
        }
        let v = f(d);
        if v.is_finite() {
            sum += w * v;
        }
    }
    sum * half * H
}

/// Double-exponential quadrature of `f` over the real line.
pub fn sinh_sinh(f: impl Fn(f64) -> f64) -> f64 {
    let n = (T_MAX / H) as i64;
    let mut sum = 0.0;
    for k in -n..=n {
        let t = k as f64 * H;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = u.sinh();
        let jac = std::f64::consts::FRAC_PI_2 * t.cosh() * u.cosh();
        let v = f(x) * jac;
        if v.is_finite() {
            sum += v;
        }
    }
    sum * H
}

/// Unnormalized log density of the standard t.
pub fn t_kernel_log(x: f64, nu: f64) -> f64 {
    -(nu + 1.0) / 2.0 * (x * x / nu).ln_1p()
}

/// Log normalizing constant of the t density by quadrature.
pub fn t_log_norm_quadrature(nu: f64) -> f64 {
    -sinh_sinh(|x| t_kernel_log(x, nu).exp()).ln()
}

pub fn t_log_density_oracle(x: f64, nu: f64) -> f64 {
    t_kernel_log(x, nu) + t_log_norm_quadrature(nu)
}

/// `log P(X <= x)` for a symmetric density given by `log_kernel + log_norm`,
/// integrating the left tail through `s = -cot(d)`.
pub fn symmetric_log_cdf_oracle(x: f64, log_kernel: impl Fn(f64) -> f64, log_norm: f64) -> f64 {
    let left = |x: f64| {
        // x <= 0: d ranges over (0, atan(1/|x|)].
        let d_max = if x == 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            (1.0 / x.abs()).atan()
        };
        tanh_sinh_from_zero(
            |d| {
                let s = -1.0 / d.tan();
                let sin = d.sin();
                (log_kernel(s) + log_norm).exp() / (sin * sin)
            },
            d_max,
        )
    };
    if x <= 0.0 {
        left(x).ln()
    } else {
        (-left(-x)).ln_1p()
    }
}

pub fn t_log_cdf_oracle(x: f64, nu: f64) -> f64 {
    symmetric_log_cdf_oracle(x, |s| t_kernel_log(s, nu), t_log_norm_quadrature(nu))
}

pub fn normal_log_norm_quadrature() -> f64 {
    -sinh_sinh(|x| (-0.5 * x * x).exp()).ln()
}

pub fn normal_log_cdf_oracle(x: f64) -> f64 {
    symmetric_log_cdf_oracle(x, |s| -0.5 * s * s, normal_log_norm_quadrature())
}

/// Long-run variance as the Bartlett-weighted double sum over all pairs of
/// demeaned squared returns.
pub fn newey_west_oracle(returns: &[f64], lags: usize) -> f64 {
    let sq: Vec<f64> = returns.iter().map(|r| r * r).collect();
    let mut mean = 0.0;
    for s in &sq {
        mean += s;
    }
    mean /= sq.len() as f64;
    let mut total = 0.0;
    for t in 0..sq.len() {
        for s in 0..sq.len() {
            let k = t.abs_diff(s);
            if k <= lags {
                let w = 1.0 - k as f64 / (lags as f64 + 1.0);
                total += w * (sq[t] - mean) * (sq[s] - mean);
            }
        }
    }
    total
}

/// Row-by-row likelihood written out directly from the model definition.
/// Distribution functions come from the quadrature oracles above.
pub fn loglik_oracle(params: &TobitParams, data: &RoundDataset, spec: &TobitSpec) -> f64 {
    let nu = params.nu;
    let log_norm = match spec.family {
        ErrorFamily::StudentT => t_log_norm_quadrature(nu.unwrap()),
        ErrorFamily::Gaussian => normal_log_norm_quadrature(),
    };
    let kernel = |z: f64| match spec.family {
        ErrorFamily::StudentT => t_kernel_log(z, nu.unwrap()),
        ErrorFamily::Gaussian => -0.5 * z * z,
    };
    let th = |i: usize| params.theta.get(i).copied().unwrap_or(0.0);
    let ga = |i: usize| params.gamma.get(i).copied().unwrap_or(0.0);
    let mut total = 0.0;
    for row in &data.rows {
        let (y, c, a1, a2) = match spec.form {
            Form::Linear => (row.bid_scaled, spec.censor_point, row.x1, row.x2),
            Form::LogLog => (
                (row.bid_scaled * 1e15).ln(),
                (spec.censor_point * 1e15).ln(),
                row.x1.ln(),
                row.x2.ln(),
            ),
        };
        let mu = th(0) + th(1) * a1 + th(2) * a2;
        let log_sigma = ga(0) + ga(1) * row.x1.ln() + ga(2) * row.x2.ln();
        let sigma = log_sigma.exp();
        if row.censored {
            total += symmetric_log_cdf_oracle((c - mu) / sigma, kernel, log_norm);
        } else {
            total += -log_sigma + kernel((y - mu) / sigma) + log_norm;
        }
    }
    total
}

/// Random rows with positive regressors and roughly 30% censoring.
pub fn random_rows(seed: u64, n: usize) -> RoundDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let x1: f64 = rng.random_range(0.5..60.0);
            let x2: f64 = (rng.random_range(-3.0..3.0f64)).exp();
            let censored = rng.random_bool(0.3);
            let bid = if censored {
                1.0
            } else {
                rng.random_range(1.0001..40.0)
            };
            DatasetRow {
                round_id: i as u64 + 1,
                bidder: "0xabc".into(),
                bid_scaled: bid,
                censored,
                x1,
                x2,
                p_start: 3000.0,
                round_start_ms: 1_746_057_600_000 + 60_000 * i as i64,
            }
        })
        .collect();
    RoundDataset::new(rows)
}

/// Random parameters compatible with `spec`, at magnitudes where the
/// likelihood is well conditioned for `random_rows`.
pub fn random_params(rng: &mut ChaCha8Rng, spec: &TobitSpec) -> TobitParams {
    let p = spec.regressors.n_coef();
    let (theta, gamma) = match spec.form {
        Form::Linear => (
            [
                rng.random_range(-1.0..3.0),
                rng.random_range(0.0..0.6),
                rng.random_range(-2.5..0.5),
            ],
            [
                rng.random_range(-2.0..0.5),
                rng.random_range(0.2..1.2),
                rng.random_range(-0.4..0.2),
            ],
        ),
        Form::LogLog => (
            [
                rng.random_range(33.0..37.0),
                rng.random_range(0.0..1.5),
                rng.random_range(-0.6..0.2),
            ],
            [
                rng.random_range(-0.5..0.8),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            ],
        ),
    };
    TobitParams {
        theta: theta[..p].to_vec(),
        gamma: gamma[..p].to_vec(),
        nu: match spec.family {
            ErrorFamily::StudentT => Some(rng.random_range(0.8..6.0)),
            ErrorFamily::Gaussian => None,
        },
    }
}

pub const FULL_SAMPLE_N: usize = 264_959;

/// A fit carrying injected estimates, for rendering tests.
pub struct Injected<'a> {
    pub regressors: Regressors,
    pub theta: &'a [(f64, f64)],
    pub gamma: &'a [(f64, f64)],
    pub nu: Option<f64>,
    pub loglik: f64,
    pub mcfadden: f64,
    pub censored: usize,
}

pub fn injected_fit(form: Form, family: ErrorFamily, v: Injected) -> TobitFit {
    let spec = TobitSpec::new(form, family, v.regressors);
    let mut se: Vec<f64> = v.theta.iter().chain(v.gamma).map(|p| p.1).collect();
    if spec.estimates_nu() {
        se.push(0.01);
    }
    let k = spec.n_params();
    TobitFit {
        spec,
        params: TobitParams {
            theta: v.theta.iter().map(|p| p.0).collect(),
            gamma: v.gamma.iter().map(|p| p.0).collect(),
            nu: v.nu,
        },
        std_errors: Some(se),
        loglik: v.loglik,
        aic: ela_core::mle::aic(v.loglik, k),
        bic: ela_core::mle::bic(v.loglik, k, FULL_SAMPLE_N),
        mcfadden_r2: Some(v.mcfadden),
        n_obs: FULL_SAMPLE_N,
        n_censored: v.censored,
        converged: true,
        n_params: k,
        iterations: 0,
    }
}

fn panel(
    bidder: &str,
    form: Form,
    family: ErrorFamily,
    reduced: Injected,
    full: Injected,
) -> ela_core::analysis::BidderPanel {
    ela_core::analysis::BidderPanel {
        bidder: bidder.into(),
        reduced: Some(injected_fit(form, family, reduced)),
        full: Some(injected_fit(form, family, full)),
    }
}

/// Linear t-Tobit table with fixed two-bidder reference estimates.
pub fn reference_linear_t() -> ela_core::analysis::ReportTable {
    let (form, family) = (Form::Linear, ErrorFamily::StudentT);
    let c = FULL_SAMPLE_N;
    ela_core::analysis::ReportTable {
        form,
        family,
        lagged: false,
        panels: vec![
            panel(
                "0x8c6f5b3e",
                form,
                family,
                Injected {
                    regressors: Regressors::Reduced,
                    theta: &[(0.9878, 0.0011), (0.3404, 0.0012)],
                    gamma: &[(-0.1690, 0.0052), (0.5933, 0.0022)],
                    nu: Some(1.23),
                    loglik: -729873.3216,
                    mcfadden: 0.071,
                    censored: c,
                },
                Injected {
                    regressors: Regressors::Full,
                    theta: &[(0.9836, 0.0021), (0.3472, 0.0014), (-2.0792, 0.0340)],
                    gamma: &[(-2.2705, 0.0286), (1.0895, 0.0072), (-0.3005, 0.0039)],
                    nu: Some(1.30),
                    loglik: -724012.1718,
                    mcfadden: 0.079,
                    censored: c,
                },
            ),
            panel(
                "0x95c0d1a2",
                form,
                family,
                Injected {
                    regressors: Regressors::Reduced,
                    theta: &[(1.3691, 0.0061), (0.3828, 0.0015)],
                    gamma: &[(0.2718, 0.0041), (0.4310, 0.0018)],
                    nu: Some(1.55),
                    loglik: -724400.4974,
                    mcfadden: 0.078,
                    censored: c,
                },
                Injected {
                    regressors: Regressors::Full,
                    theta: &[(1.1393, 0.0060), (0.4421, 0.0017), (-3.1878, 0.0460)],
                    gamma: &[(-1.4502, 0.0252), (0.8572, 0.0064), (-0.2390, 0.0034)],
                    nu: Some(1.70),
                    loglik: -717011.0168,
                    mcfadden: 0.087,
                    censored: c,
                },
            ),
        ],
    }
}

/// Log-log Gaussian table with fixed two-bidder reference estimates.
pub fn reference_loglog_gauss() -> ela_core::analysis::ReportTable {
    let (form, family) = (Form::LogLog, ErrorFamily::Gaussian);
    let c = 9_151_360;
    ela_core::analysis::ReportTable {
        form,
        family,
        lagged: false,
        panels: vec![
            panel(
                "0x8c6f5b3e",
                form,
                family,
                Injected {
                    regressors: Regressors::Reduced,
                    theta: &[(44.5019, 0.0313), (0.4541, 0.0016)],
                    gamma: &[(-0.0320, 0.0169), (-0.0013, 0.0009)],
                    nu: None,
                    loglik: -358833.4573,
                    mcfadden: 0.119,
                    censored: c,
                },
                Injected {
                    regressors: Regressors::Full,
                    theta: &[(44.7182, 0.0298), (1.2026, 0.0048), (-0.4403, 0.0026)],
                    gamma: &[(0.5389, 0.0206), (0.0384, 0.0038), (-0.0042, 0.0021)],
                    nu: None,
                    loglik: -345110.7425,
                    mcfadden: 0.153,
                    censored: c,
                },
            ),
            panel(
                "0x95c0d1a2",
                form,
                family,
                Injected {
                    regressors: Regressors::Reduced,
                    theta: &[(45.4140, 0.0283), (0.4962, 0.0015)],
                    gamma: &[(-0.5813, 0.0162), (-0.0255, 0.0008)],
                    nu: None,
                    loglik: -338519.7622,
                    mcfadden: 0.150,
                    censored: c,
                },
                Injected {
                    regressors: Regressors::Full,
                    theta: &[(45.7480, 0.0275), (1.3663, 0.0044), (-0.5092, 0.0024)],
                    gamma: &[(-0.2515, 0.0204), (-0.0842, 0.0039), (0.0478, 0.0021)],
                    nu: None,
                    loglik: -317455.3824,
                    mcfadden: 0.203,
                    censored: c,
                },
            ),
        ],
    }
}

pub fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

/// Small simulate-mode pipeline config writing into `out`.
pub fn small_pipeline(out: &std::path::Path, n_rounds: usize) -> ela_core::analysis::RunConfig {
    let mut cfg = ela_core::analysis::RunConfig::default();
    cfg.out_dir = out.to_path_buf();
    cfg.sim.n_rounds = n_rounds;
    cfg.fit.starts = 2;
    cfg
}

/// Heavy-tailed one-second returns at typical ETH magnitudes, with volatility
/// clustering so the autocovariances are not all near zero.
pub fn return_window(seed: u64, len: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StudentT};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = StudentT::new(4.0).unwrap();
    let mut vol: f64 = 2e-4;
    (0..len)
        .map(|_| {
            vol = (0.9 * vol.ln() + 0.1 * (2e-4f64).ln() + 0.3 * rng.random::<f64>() - 0.15).exp();
            vol * t.sample(&mut rng)
        })
        .collect()
}

/// Richardson-extrapolated central-difference gradient of the log-likelihood
/// in the optimization parametrization.
pub fn numeric_grad(design: &ela_core::mle::TobitDesign, v: &[f64]) -> Vec<f64> {
    let f = |x: &[f64]| design.loglik_unchecked(&TobitParams::from_vector(&design.spec, x));
    (0..v.len())
        .map(|j| {
            let d = |h: f64| {
                let mut up = v.to_vec();
                let mut dn = v.to_vec();
                up[j] += h;
                dn[j] -= h;
                (f(&up) - f(&dn)) / (2.0 * h)
            };
            let h = 1e-3 * (1.0 + v[j].abs());
            (4.0 * d(h / 2.0) - d(h)) / 3.0
        })
        .collect()
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over paired entries.
pub fn max_rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
