//! Heteroskedastic censored-regression likelihood.
//!
//! For each row with observed bid `b`, location `mu = theta . x` and scale
//! `log sigma = gamma . z`:
//!
//! ```text
//! uncensored:  -log sigma + log f((b - mu) / sigma)
//! censored:    log F((C - mu) / sigma)
//! ```
//!
//! where `f`, `F` are the standardized Student-t (or Gaussian) density and CDF.
//! The linear form uses `x = (1, x1, x2)` and `z = (1, log x1, log x2)`; the
//! log-log form logs the bid, the censoring point and the location regressors.

use rayon::prelude::*;

use super::dist;
use super::MleError;
use crate::market_data::{RoundDataset, WEI_PER_BID_UNIT, X1_SCALE, X2_SCALE};

/// Lower bound of the degrees of freedom; `nu = NU_MIN + exp(eta)`.
pub const NU_MIN: f64 = 0.1;
/// Floor substituted for a zero moment before it is logged (pre-scaling units).
pub const DEFAULT_LOG_FLOOR: f64 = 1e-30;
/// Rows per partial sum. Fixed so that reductions are bit-reproducible.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Form {
    Linear,
    LogLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorFamily {
    StudentT,
    Gaussian,
}

/// Which regressors enter both the location and the scale equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regressors {
    /// Intercepts only; the null model for McFadden's R².
    InterceptOnly,
    /// Intercept and the `E[IV]` regressor.
    Reduced,
    /// Intercept, `E[IV]` and `Var(IV)` regressors.
    Full,
}

impl Regressors {
    pub fn n_coef(self) -> usize {
        match self {
            Regressors::InterceptOnly => 1,
            Regressors::Reduced => 2,
            Regressors::Full => 3,
        }
    }
}

/// Units of the logged bid in the log-log form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogBidBase {
    /// `log(bid_wei)`.
    Wei,
    /// `log(bid_scaled)`.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TobitSpec {
    pub form: Form,
    pub family: ErrorFamily,
    pub regressors: Regressors,
    /// Censoring point in scaled bid units.
    pub censor_point: f64,
    pub log_floor: f64,
    /// Hold `nu` at this value instead of estimating it (Student-t only).
    pub fixed_nu: Option<f64>,
    pub log_bid_base: LogBidBase,
}

impl TobitSpec {
    pub fn new(form: Form, family: ErrorFamily, regressors: Regressors) -> Self {
        Self {
            form,
            family,
            regressors,
            censor_point: 1.0,
            log_floor: DEFAULT_LOG_FLOOR,
            fixed_nu: None,
            log_bid_base: LogBidBase::Wei,
        }
    }

    pub fn with_regressors(self, regressors: Regressors) -> Self {
        Self { regressors, ..self }
    }

    pub fn estimates_nu(&self) -> bool {
        self.family == ErrorFamily::StudentT && self.fixed_nu.is_none()
    }

    /// Free parameters, counting `nu` when it is estimated.
    pub fn n_params(&self) -> usize {
        2 * self.regressors.n_coef() + usize::from(self.estimates_nu())
    }

    /// Parameter names in vector order.
    pub fn param_names(&self) -> Vec<String> {
        let p = self.regressors.n_coef();
        let mut names: Vec<String> = (0..p).map(|i| format!("theta{i}")).collect();
        names.extend((0..p).map(|i| format!("gamma{i}")));
        if self.estimates_nu() {
            names.push("nu".into());
        }
        names
    }
}

/// Location coefficients, log-scale coefficients and the t degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct TobitParams {
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `None` for the Gaussian family.
    pub nu: Option<f64>,
}

impl TobitParams {
    pub(crate) fn check(&self, spec: &TobitSpec) -> Result<(), MleError> {
        let p = spec.regressors.n_coef();
        if self.theta.len() != p || self.gamma.len() != p {
            return Err(MleError::ParamMismatch(format!(
                "expected {p} location and {p} scale coefficients, got {} and {}",
                self.theta.len(),
                self.gamma.len()
            )));
        }
        if spec.family == ErrorFamily::StudentT {
            match self.nu.or(spec.fixed_nu) {
                Some(nu) if nu > 0.0 => {}
                other => {
                    return Err(MleError::InvalidDegreesOfFreedom(other.unwrap_or(f64::NAN)));
                }
            }
        }
        Ok(())
    }

    /// Effective `nu` for the likelihood.
    fn nu_for(&self, spec: &TobitSpec) -> Option<f64> {
        match spec.family {
            ErrorFamily::Gaussian => None,
            ErrorFamily::StudentT => spec.fixed_nu.or(self.nu),
        }
    }

    /// Unconstrained optimization vector `(theta, gamma, eta)`.
    pub fn to_vector(&self, spec: &TobitSpec) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.extend_from_slice(&self.gamma);
        if spec.estimates_nu() {
            let nu = self.nu.unwrap_or(4.0);
            v.push((nu - NU_MIN).max(1e-12).ln());
        }
        v
    }

    pub fn from_vector(spec: &TobitSpec, v: &[f64]) -> Self {
        let p = spec.regressors.n_coef();
        let nu = match spec.family {
            ErrorFamily::Gaussian => None,
            ErrorFamily::StudentT => spec.fixed_nu.or_else(|| Some(NU_MIN + v[2 * p].exp())),
        };
        Self {
            theta: v[..p].to_vec(),
            gamma: v[p..2 * p].to_vec(),
            nu,
        }
    }

    /// The same model written in a larger regressor set, with zero coefficients
    /// on the added regressors.
    pub fn embed(&self, regressors: Regressors) -> Self {
        let p = regressors.n_coef();
        let pad = |v: &[f64]| {
            let mut out = v.to_vec();
            out.resize(p.max(v.len()), 0.0);
            out
        };
        Self {
            theta: pad(&self.theta),
            gamma: pad(&self.gamma),
            nu: self.nu,
        }
    }

    /// Values in [`TobitSpec::param_names`] order with `nu` on its natural scale.
    pub fn values(&self, spec: &TobitSpec) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.extend_from_slice(&self.gamma);
        if spec.estimates_nu() {
            v.push(self.nu.unwrap_or(f64::NAN));
        }
        v
    }
}

/// Response and regressors after the form's transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedData {
    pub response: Vec<f64>,
    pub censored: Vec<bool>,
    /// Location regressors (excluding the intercept).
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Scale regressors (excluding the intercept).
    pub log_x1: Vec<f64>,
    pub log_x2: Vec<f64>,
    pub censor_point: f64,
}

fn floors(log_floor: f64) -> (f64, f64) {
    (log_floor * X1_SCALE, log_floor * X2_SCALE)
}

fn floored_logs(data: &RoundDataset, log_floor: f64) -> (Vec<f64>, Vec<f64>) {
    let (f1, f2) = floors(log_floor);
    data.rows
        .iter()
        .map(|r| (r.x1.max(f1).ln(), r.x2.max(f2).ln()))
        .unzip()
}

/// Log-log view: bid, censoring point and both regressors logged.
///
/// With [`LogBidBase::Wei`] the response is `log(bid_scaled * 1e15)`.
pub fn loglog_view(
    data: &RoundDataset,
    censor_point: f64,
    log_floor: f64,
    base: LogBidBase,
) -> Result<TransformedData, MleError> {
    let unit = match base {
        LogBidBase::Wei => WEI_PER_BID_UNIT,
        LogBidBase::Scaled => 1.0,
    };
    let mut response = Vec::with_capacity(data.len());
    for (i, r) in data.rows.iter().enumerate() {
        if !(r.bid_scaled > 0.0) {
            return Err(MleError::NonPositiveBid {
                row: i,
                value: r.bid_scaled,
            });
        }
        response.push((r.bid_scaled * unit).ln());
    }
    let (log_x1, log_x2) = floored_logs(data, log_floor);
    Ok(TransformedData {
        response,
        censored: data.rows.iter().map(|r| r.censored).collect(),
        x1: log_x1.clone(),
        x2: log_x2.clone(),
        log_x1,
        log_x2,
        censor_point: (censor_point * unit).ln(),
    })
}

/// Linear-form view: raw bid and regressors, logged scale regressors.
pub fn linear_view(data: &RoundDataset, censor_point: f64, log_floor: f64) -> TransformedData {
    let (log_x1, log_x2) = floored_logs(data, log_floor);
    TransformedData {
        response: data.rows.iter().map(|r| r.bid_scaled).collect(),
        censored: data.rows.iter().map(|r| r.censored).collect(),
        x1: data.rows.iter().map(|r| r.x1).collect(),
        x2: data.rows.iter().map(|r| r.x2).collect(),
        log_x1,
        log_x2,
        censor_point,
    }
}

/// Prepared design for repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub struct TobitDesign {
    pub spec: TobitSpec,
    pub y: Vec<f64>,
    pub censored: Vec<bool>,
    /// Location regressors, first `p` entries used.
    pub loc: Vec<[f64; 3]>,
    /// Scale regressors, first `p` entries used.
    pub scl: Vec<[f64; 3]>,
    pub censor: f64,
}

/// Per-row log-likelihood contribution and its partials with respect to the
/// location, the log scale and `nu`.
#[derive(Debug, Clone, Copy, Default)]
struct RowTerms {
    ll: f64,
    d_mu: f64,
    d_log_sigma: f64,
    d_nu: f64,
}

impl TobitDesign {
    pub fn new(data: &RoundDataset, spec: &TobitSpec) -> Result<Self, MleError> {
        if data.is_empty() {
            return Err(MleError::EmptyData);
        }
        let t = match spec.form {
            Form::Linear => linear_view(data, spec.censor_point, spec.log_floor),
            Form::LogLog => {
                loglog_view(data, spec.censor_point, spec.log_floor, spec.log_bid_base)?
            }
        };
        let loc = (0..t.response.len())
            .map(|i| [1.0, t.x1[i], t.x2[i]])
            .collect();
        let scl = (0..t.response.len())
            .map(|i| [1.0, t.log_x1[i], t.log_x2[i]])
            .collect();
        Ok(Self {
            spec: *spec,
            y: t.response,
            censored: t.censored,
            loc,
            scl,
            censor: t.censor_point,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_censored(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }

    fn row(&self, i: usize, params: &TobitParams, nu: Option<f64>, grad: bool) -> RowTerms {
        let p = self.spec.regressors.n_coef();
        let mu: f64 = (0..p).map(|j| params.theta[j] * self.loc[i][j]).sum();
        let log_sigma: f64 = (0..p).map(|j| params.gamma[j] * self.scl[i][j]).sum();
        let sigma = log_sigma.exp();
        let mut out = RowTerms::default();
        if self.censored[i] {
            let c = (self.censor - mu) / sigma;
            let (log_cdf, log_pdf) = match nu {
                Some(nu) => (dist::t_logcdf(c, nu), dist::t_logpdf(c, nu)),
                None => (dist::normal_logcdf(c), dist::normal_logpdf(c)),
            };
            out.ll = log_cdf;
            if grad {
                let lambda = (log_pdf - log_cdf).exp();
                out.d_mu = -lambda / sigma;
                out.d_log_sigma = -lambda * c;
                if let Some(nu) = nu {
                    out.d_nu = dist::t_dlogcdf_dnu(c, nu);
                }
            }
        } else {
            let z = (self.y[i] - mu) / sigma;
            let (log_pdf, score) = match nu {
                Some(nu) => (dist::t_logpdf(z, nu), dist::t_dlogpdf_dx(z, nu)),
                None => (dist::normal_logpdf(z), -z),
            };
            out.ll = -log_sigma + log_pdf;
            if grad {
                out.d_mu = -score / sigma;
                out.d_log_sigma = -1.0 - score * z;
                if let Some(nu) = nu {
                    out.d_nu = dist::t_dlogpdf_dnu(z, nu);
                }
            }
        }
        out
    }

    /// Sum of row contributions over a fixed chunking; may be non-finite.
    pub fn loglik_unchecked(&self, params: &TobitParams) -> f64 {
        let nu = params.nu_for(&self.spec);
        if nu.is_some_and(|nu| !nu.is_finite()) {
            return f64::NAN;
        }
        let partials: Vec<f64> = (0..self.n_obs())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|rows| {
                rows.iter()
                    .map(|&i| self.row(i, params, nu, false).ll)
                    .sum()
            })
            .collect();
        partials.iter().sum()
    }

    pub fn loglik(&self, params: &TobitParams) -> Result<f64, MleError> {
        params.check(&self.spec)?;
        let ll = self.loglik_unchecked(params);
        if ll.is_finite() {
            return Ok(ll);
        }
        let nu = params.nu_for(&self.spec);
        let row = (0..self.n_obs())
            .find(|&i| !self.row(i, params, nu, false).ll.is_finite())
            .unwrap_or(0);
        Err(MleError::NonFiniteLikelihood {
            row,
            value: self.row(row, params, nu, false).ll,
        })
    }

    /// Log-likelihood and its gradient with respect to the optimization vector
    /// `(theta, gamma, eta)`.
    pub fn loglik_grad(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let spec = &self.spec;
        let p = spec.regressors.n_coef();
        let dim = spec.n_params();
        let params = TobitParams::from_vector(spec, v);
        let nu = params.nu_for(spec);
        if nu.is_some_and(|nu| !nu.is_finite()) {
            // exp(eta) overflowed; outside the usable domain.
            return (f64::NAN, vec![f64::NAN; dim]);
        }
        let free_nu = spec.estimates_nu();
        let dnu_deta = if free_nu { v[2 * p].exp() } else { 0.0 };

        let idx: Vec<usize> = (0..self.n_obs()).collect();
        let partials: Vec<[f64; 8]> = idx
            .par_chunks(CHUNK)
            .map(|rows| {
                let mut acc = [0.0; 8];
                for &i in rows {
                    let t = self.row(i, &params, nu, true);
                    acc[0] += t.ll;
                    for j in 0..p {
                        acc[1 + j] += t.d_mu * self.loc[i][j];
                        acc[1 + p + j] += t.d_log_sigma * self.scl[i][j];
                    }
                    if free_nu {
                        acc[1 + 2 * p] += t.d_nu;
                    }
                }
                acc
            })
            .collect();
        let mut total = [0.0; 8];
        for part in &partials {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        let mut grad = total[1..=dim].to_vec();
        if free_nu {
            grad[2 * p] *= dnu_deta;
        }
        (total[0], grad)
    }
}

/// Log-likelihood of `params` on `data` under `spec`.
pub fn tobit_loglik(
    params: &TobitParams,
    data: &RoundDataset,
    spec: &TobitSpec,
) -> Result<f64, MleError> {
    TobitDesign::new(data, spec)?.loglik(params)
}
