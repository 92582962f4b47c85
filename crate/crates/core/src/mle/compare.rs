//! Information criteria, likelihood-ratio tests and McFadden's R².

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::fit::TobitFit;
use super::MleError;

pub fn aic(loglik: f64, k: usize) -> f64 {
    -2.0 * loglik + 2.0 * k as f64
}

pub fn bic(loglik: f64, k: usize, n_obs: usize) -> f64 {
    -2.0 * loglik + k as f64 * (n_obs as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrTest {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
}

impl LrTest {
    /// Test from raw log-likelihoods and parameter counts.
    ///
    /// A full model that fits worse than the reduced one (possible only when
    /// an optimizer stopped early) gives `chi2 = 0` and a warning.
    pub fn from_logliks(
        ll_full: f64,
        k_full: usize,
        ll_reduced: f64,
        k_reduced: usize,
    ) -> Result<Self, MleError> {
        if k_full <= k_reduced {
            return Err(MleError::NotNested(format!(
                "full model has {k_full} parameters, reduced has {k_reduced}"
            )));
        }
        let raw = 2.0 * (ll_full - ll_reduced);
        if raw < 0.0 {
            log::warn!(
                "full model log-likelihood below reduced ({ll_full} < {ll_reduced}); LR set to 0"
            );
        }
        let chi2 = raw.max(0.0);
        let df = k_full - k_reduced;
        let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
        Ok(Self {
            chi2,
            df,
            p_value: dist.sf(chi2),
        })
    }
}

/// Likelihood-ratio test of `reduced` against `full` on the same data.
pub fn lr_test(full: &TobitFit, reduced: &TobitFit) -> Result<LrTest, MleError> {
    let (f, r) = (&full.spec, &reduced.spec);
    if f.form != r.form || f.family != r.family || f.fixed_nu != r.fixed_nu {
        return Err(MleError::NotNested("form or error family differ".into()));
    }
    if r.regressors >= f.regressors {
        return Err(MleError::NotNested(format!(
            "{:?} is not a restriction of {:?}",
            r.regressors, f.regressors
        )));
    }
    if full.n_obs != reduced.n_obs || full.n_censored != reduced.n_censored {
        return Err(MleError::NotNested("fits use different data".into()));
    }
    LrTest::from_logliks(full.loglik, full.n_params, reduced.loglik, reduced.n_params)
}

/// `1 - LL / LL_null`.
pub fn mcfadden_r2(loglik: f64, null_loglik: f64) -> Result<f64, MleError> {
    if null_loglik == 0.0 || !null_loglik.is_finite() {
        return Err(MleError::UndefinedNull);
    }
    Ok(1.0 - loglik / null_loglik)
}
