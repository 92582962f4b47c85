//! Heteroskedastic censored regression (Tobit) by maximum likelihood.

mod compare;
mod dist;
mod fit;
mod likelihood;
mod optim;

use thiserror::Error;

pub use compare::{aic, bic, lr_test, mcfadden_r2, LrTest};
pub use dist::{ln_beta_reg, normal_log_cdf, normal_log_density, t_log_cdf, t_log_density};
pub use fit::{
    family_name, fit_design, fit_design_from, fit_tobit, fit_tobit_from, form_name, parse_family,
    parse_form, parse_regressors, regressors_name, FitOptions, TobitFit,
};
pub use likelihood::{
    linear_view, loglog_view, tobit_loglik, ErrorFamily, Form, LogBidBase, Regressors, TobitDesign,
    TobitParams, TobitSpec, TransformedData, DEFAULT_LOG_FLOOR, NU_MIN,
};
pub use optim::{minimize_bfgs, BfgsOptions, BfgsResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MleError {
    #[error("argument must be finite, got {0}")]
    NonFiniteArgument(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDegreesOfFreedom(f64),
    #[error("parameters do not match the specification: {0}")]
    ParamMismatch(String),
    #[error("row {row}: bid must be positive to take logs, got {value}")]
    NonPositiveBid { row: usize, value: f64 },
    #[error("dataset is empty")]
    EmptyData,
    #[error("row {row}: log-likelihood contribution is {value}")]
    NonFiniteLikelihood { row: usize, value: f64 },
    #[error("every observation is censored; the location is not identified")]
    AllCensored,
    #[error("{n_obs} observations cannot identify {n_params} parameters")]
    TooFewObservations { n_obs: usize, n_params: usize },
    #[error("no starting point produced a finite likelihood")]
    NoFiniteStart,
    #[error("models are not nested: {0}")]
    NotNested(String),
    #[error("null log-likelihood is zero; McFadden R² is undefined")]
    UndefinedNull,
}
