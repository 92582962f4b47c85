//! Multi-start quasi-Newton fitting and observed-information standard errors.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::compare::{aic, bic};
use super::likelihood::{ErrorFamily, Form, Regressors, TobitDesign, TobitParams, TobitSpec};
use super::optim::{minimize_bfgs, BfgsOptions};
use super::MleError;
use crate::market_data::RoundDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Total starting points: one moment-based plus `starts - 1` jittered copies.
    pub starts: usize,
    pub max_iter: usize,
    /// Gradient max-norm tolerance on the per-observation objective.
    pub tol: f64,
    pub seed: u64,
    /// Relative standard deviation of the start jitter.
    pub jitter: f64,
    pub std_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            max_iter: 500,
            tol: 1e-6,
            seed: 0x5eed,
            jitter: 0.25,
            std_errors: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TobitFit {
    pub spec: TobitSpec,
    pub params: TobitParams,
    /// In [`TobitSpec::param_names`] order; `None` when the information matrix
    /// is singular or standard errors were not requested.
    pub std_errors: Option<Vec<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Filled in by [`TobitFit::set_null`].
    pub mcfadden_r2: Option<f64>,
    pub n_obs: usize,
    pub n_censored: usize,
    pub converged: bool,
    pub n_params: usize,
    pub iterations: usize,
}

impl TobitFit {
    pub fn names(&self) -> Vec<String> {
        self.spec.param_names()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.params.values(&self.spec)
    }

    /// Estimate and standard error by parameter name.
    pub fn get(&self, name: &str) -> Option<(f64, Option<f64>)> {
        let i = self.names().iter().position(|n| n == name)?;
        Some((
            self.estimates()[i],
            self.std_errors.as_ref().map(|se| se[i]),
        ))
    }

    /// Two-sided normal p-value of `estimate / se` for a coefficient.
    pub fn p_value(&self, name: &str) -> Option<f64> {
        let (est, se) = self.get(name)?;
        two_sided_p(est, se?)
    }

    pub fn set_null(&mut self, null_loglik: f64) {
        self.mcfadden_r2 = super::compare::mcfadden_r2(self.loglik, null_loglik).ok();
    }

    /// `parameter,estimate,std_error` rows followed by the statistics block.
    pub fn write_csv(&self, w: impl Write) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["parameter", "estimate", "std_error"])?;
        let names = self.names();
        let est = self.estimates();
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, name) in names.iter().enumerate() {
            if name == "nu" {
                continue;
            }
            let se = self.std_errors.as_ref().map(|s| s[i]);
            out.write_record([name.as_str(), &est[i].to_string(), &fmt_opt(se)])?;
        }
        let nu = match self.spec.family {
            ErrorFamily::Gaussian => None,
            ErrorFamily::StudentT => self.params.nu,
        };
        let nu_se = self.get("nu").and_then(|(_, se)| se);
        out.write_record(["nu", &fmt_opt(nu), &fmt_opt(nu_se)])?;
        let stats: [(&str, String); 11] = [
            ("form", form_name(self.spec.form).into()),
            ("family", family_name(self.spec.family).into()),
            ("regressors", regressors_name(self.spec.regressors).into()),
            ("loglik", self.loglik.to_string()),
            ("aic", self.aic.to_string()),
            ("bic", self.bic.to_string()),
            ("mcfadden_r2", fmt_opt(self.mcfadden_r2)),
            ("n_obs", self.n_obs.to_string()),
            ("n_censored", self.n_censored.to_string()),
            ("n_params", self.n_params.to_string()),
            ("converged", self.converged.to_string()),
        ];
        for (k, v) in stats {
            out.write_record([k, v.as_str(), ""])?;
        }
        out.flush()
    }

    /// Reads a fit written by [`TobitFit::write_csv`].
    pub fn read_csv(r: impl Read) -> Result<Self, String> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows: Vec<(String, String, String)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let get = |i: usize| rec.get(i).unwrap_or("").to_string();
            rows.push((get(0), get(1), get(2)));
        }
        let find = |k: &str| -> Result<&(String, String, String), String> {
            rows.iter()
                .find(|r| r.0 == k)
                .ok_or(format!("missing row `{k}`"))
        };
        let num = |s: &str| -> Result<f64, String> { s.parse().map_err(|e| format!("`{s}`: {e}")) };
        let opt = |s: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let form = parse_form(&find("form")?.1)?;
        let family = parse_family(&find("family")?.1)?;
        let regressors = parse_regressors(&find("regressors")?.1)?;
        let mut spec = TobitSpec::new(form, family, regressors);
        let n_params: usize = find("n_params")?.1.parse().map_err(|e| format!("{e}"))?;
        let nu = opt(&find("nu")?.1)?;
        if family == ErrorFamily::StudentT && n_params == 2 * regressors.n_coef() {
            spec.fixed_nu = nu;
        }
        let p = regressors.n_coef();
        let mut theta = Vec::new();
        let mut gamma = Vec::new();
        let mut ses = Vec::new();
        for i in 0..p {
            let r = find(&format!("theta{i}"))?;
            theta.push(num(&r.1)?);
            ses.push(opt(&r.2)?);
        }
        for i in 0..p {
            let r = find(&format!("gamma{i}"))?;
            gamma.push(num(&r.1)?);
            ses.push(opt(&r.2)?);
        }
        if spec.estimates_nu() {
            ses.push(opt(&find("nu")?.2)?);
        }
        let std_errors = ses.into_iter().collect::<Option<Vec<f64>>>();
        Ok(Self {
            spec,
            params: TobitParams { theta, gamma, nu },
            std_errors,
            loglik: num(&find("loglik")?.1)?,
            aic: num(&find("aic")?.1)?,
            bic: num(&find("bic")?.1)?,
            mcfadden_r2: opt(&find("mcfadden_r2")?.1)?,
            n_obs: find("n_obs")?.1.parse().map_err(|e| format!("{e}"))?,
            n_censored: find("n_censored")?.1.parse().map_err(|e| format!("{e}"))?,
            converged: find("converged")?.1 == "true",
            n_params,
            iterations: 0,
        })
    }
}

pub fn form_name(f: Form) -> &'static str {
    match f {
        Form::Linear => "linear",
        Form::LogLog => "loglog",
    }
}

pub fn family_name(f: ErrorFamily) -> &'static str {
    match f {
        ErrorFamily::StudentT => "t",
        ErrorFamily::Gaussian => "gauss",
    }
}

pub fn regressors_name(r: Regressors) -> &'static str {
    match r {
        Regressors::InterceptOnly => "null",
        Regressors::Reduced => "reduced",
        Regressors::Full => "full",
    }
}

pub fn parse_form(s: &str) -> Result<Form, String> {
    match s {
        "linear" => Ok(Form::Linear),
        "loglog" => Ok(Form::LogLog),
        _ => Err(format!("unknown form `{s}` (expected linear or loglog)")),
    }
}

pub fn parse_family(s: &str) -> Result<ErrorFamily, String> {
    match s {
        "t" => Ok(ErrorFamily::StudentT),
        "gauss" => Ok(ErrorFamily::Gaussian),
        _ => Err(format!("unknown error family `{s}` (expected t or gauss)")),
    }
}

pub fn parse_regressors(s: &str) -> Result<Regressors, String> {
    match s {
        "null" => Ok(Regressors::InterceptOnly),
        "reduced" => Ok(Regressors::Reduced),
        "full" => Ok(Regressors::Full),
        _ => Err(format!("unknown regressor set `{s}`")),
    }
}

pub(crate) fn two_sided_p(est: f64, se: f64) -> Option<f64> {
    if !(se > 0.0) || !est.is_finite() {
        return None;
    }
    Some(libm::erfc((est / se).abs() / std::f64::consts::SQRT_2))
}

/// Least squares on the uncensored rows for the location, a robust spread for
/// the scale intercept, `nu = 3`.
fn moment_start(design: &TobitDesign) -> Vec<f64> {
    let spec = &design.spec;
    let p = spec.regressors.n_coef();
    let rows: Vec<usize> = (0..design.n_obs())
        .filter(|&i| !design.censored[i])
        .collect();
    let y: Vec<f64> = rows.iter().map(|&i| design.y[i]).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut theta = vec![0.0; p];
    theta[0] = mean;
    if rows.len() > p {
        let x = DMatrix::from_fn(rows.len(), p, |r, c| design.loc[rows[r]][c]);
        let yv = nalgebra::DVector::from_vec(y.clone());
        if let Ok(beta) = x.clone().svd(true, true).solve(&yv, 1e-12) {
            if beta.iter().all(|b| b.is_finite()) {
                theta = beta.iter().copied().collect();
            }
        }
    }
    let mut resid: Vec<f64> = rows
        .iter()
        .map(|&i| design.y[i] - (0..p).map(|j| theta[j] * design.loc[i][j]).sum::<f64>())
        .collect();
    let mad = median(&mut resid.iter().map(|r| r.abs()).collect::<Vec<_>>());
    resid.clear();
    let spread = if mad > 0.0 {
        1.4826 * mad
    } else {
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    };
    let mut gamma = vec![0.0; p];
    gamma[0] = spread.ln();
    TobitParams {
        theta,
        gamma,
        nu: Some(3.0),
    }
    .to_vector(spec)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Negative Hessian of the log-likelihood by central differences of the
/// analytic gradient.
fn observed_information(design: &TobitDesign, v: &[f64]) -> DMatrix<f64> {
    let k = v.len();
    let mut info = DMatrix::zeros(k, k);
    for j in 0..k {
        let h = 1e-5 * (1.0 + v[j].abs());
        let mut up = v.to_vec();
        let mut dn = v.to_vec();
        up[j] += h;
        dn[j] -= h;
        let (_, gu) = design.loglik_grad(&up);
        let (_, gd) = design.loglik_grad(&dn);
        for i in 0..k {
            info[(i, j)] = -(gu[i] - gd[i]) / (2.0 * h);
        }
    }
    (&info + info.transpose()) * 0.5
}

fn standard_errors(design: &TobitDesign, v: &[f64]) -> Option<Vec<f64>> {
    let info = observed_information(design, v);
    if info.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let cov = info.cholesky()?.inverse();
    let mut se: Vec<f64> = (0..v.len()).map(|i| cov[(i, i)].sqrt()).collect();
    if design.spec.estimates_nu() {
        // Delta method: d nu / d eta = nu - NU_MIN = exp(eta).
        let last = v.len() - 1;
        se[last] *= v[last].exp();
    }
    se.iter().all(|s| s.is_finite()).then_some(se)
}

fn coordinate_scales(design: &TobitDesign) -> Vec<f64> {
    let p = design.spec.regressors.n_coef();
    let n = design.loc.len() as f64;
    let mut d = vec![1.0; design.spec.n_params()];
    for j in 1..p {
        let rms = (design.loc.iter().map(|r| r[j] * r[j]).sum::<f64>() / n).sqrt();
        if rms.is_finite() && rms > 0.0 {
            d[j] = 1.0 / rms;
        }
    }
    d
}

/// Maximum-likelihood fit of the censored regression described by `spec`.
pub fn fit_tobit(
    data: &RoundDataset,
    spec: &TobitSpec,
    opts: &FitOptions,
) -> Result<TobitFit, MleError> {
    fit_tobit_from(data, spec, opts, &[])
}

/// As [`fit_tobit`], also starting from each of `warm`. Passing the optimum of
/// a nested model (see [`TobitParams::embed`]) guarantees the larger model
/// fits at least as well.
pub fn fit_tobit_from(
    data: &RoundDataset,
    spec: &TobitSpec,
    opts: &FitOptions,
    warm: &[TobitParams],
) -> Result<TobitFit, MleError> {
    let design = TobitDesign::new(data, spec)?;
    fit_design_from(&design, opts, warm)
}

/// Fits a prepared design, e.g. one whose location regressors were perturbed.
pub fn fit_design(design: &TobitDesign, opts: &FitOptions) -> Result<TobitFit, MleError> {
    fit_design_from(design, opts, &[])
}

pub fn fit_design_from(
    design: &TobitDesign,
    opts: &FitOptions,
    warm: &[TobitParams],
) -> Result<TobitFit, MleError> {
    let spec = design.spec;
    let n = design.n_obs();
    let k = spec.n_params();
    let n_censored = design.n_censored();
    if n_censored == n {
        return Err(MleError::AllCensored);
    }
    if n <= k {
        return Err(MleError::TooFewObservations {
            n_obs: n,
            n_params: k,
        });
    }
    let scale = 1.0 / n as f64;
    // The optimizer works in u = v / d, with location slopes measured per unit
    // of their column RMS. Raw regressors can span several decades.
    let d = coordinate_scales(design);
    let objective = |u: &[f64]| {
        let v: Vec<f64> = u.iter().zip(&d).map(|(u, d)| u * d).collect();
        let (ll, g) = design.loglik_grad(&v);
        if ll.is_finite() {
            (
                -ll * scale,
                g.iter().zip(&d).map(|(x, d)| -x * d * scale).collect(),
            )
        } else {
            (f64::NAN, g)
        }
    };
    let bfgs = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.tol,
        ..BfgsOptions::default()
    };

    let base = moment_start(design);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![base.clone()];
    for w in warm {
        let w = w.embed(spec.regressors);
        if w.check(&spec).is_ok() {
            starts.push(w.to_vector(&spec));
        } else {
            log::warn!(
                "ignoring warm start that does not match {:?}",
                spec.regressors
            );
        }
    }
    for _ in 1..opts.starts.max(1) {
        starts.push(
            base.iter()
                .map(|&b| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    b + opts.jitter * b.abs().max(0.5) * z
                })
                .collect(),
        );
    }
    let mut best: Option<super::optim::BfgsResult> = None;
    for (s, start) in starts.iter().enumerate() {
        let u: Vec<f64> = start.iter().zip(&d).map(|(v, d)| v / d).collect();
        let mut r = minimize_bfgs(objective, &u, &bfgs);
        for ((x, g), d) in r.x.iter_mut().zip(r.grad.iter_mut()).zip(&d) {
            *x *= d;
            *g /= d;
        }
        log::debug!(
            "start {s}: -LL/n = {:.10}, iterations {}, converged {}",
            r.f,
            r.iterations,
            r.converged
        );
        log::trace!("start {s}: x = {:?}, grad = {:?}", r.x, r.grad);
        if !r.f.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => r.f < b.f || (r.f == b.f && r.converged && !b.converged),
        };
        if better {
            best = Some(r);
        }
    }
    let best = best.ok_or(MleError::NoFiniteStart)?;
    if !best.converged {
        log::warn!(
            "{:?} fit stopped after {} iterations with gradient max-norm {:.3e}",
            spec.regressors,
            best.iterations,
            best.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()))
        );
    }
    let params = TobitParams::from_vector(&spec, &best.x);
    let loglik = design.loglik(&params)?;
    let std_errors = if opts.std_errors {
        let se = standard_errors(design, &best.x);
        if se.is_none() {
            log::warn!(
                "observed information is not positive definite; standard errors unavailable"
            );
        }
        se
    } else {
        None
    };
    Ok(TobitFit {
        spec,
        params,
        std_errors,
        loglik,
        aic: aic(loglik, k),
        bic: bic(loglik, k, n),
        mcfadden_r2: None,
        n_obs: n,
        n_censored,
        converged: best.converged,
        n_params: k,
        iterations: best.iterations,
    })
}
