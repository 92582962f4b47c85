//! Per-round integrated-variance moment proxies.
//!
//! The expected integrated variance of a round is proxied by the realized
//! variance of its intra-round log returns. The variance of the integrated
//! variance is estimated with a Bartlett-weighted long-run variance of the
//! squared returns:
//!
//! ```text
//! Var(IV) = T * (g_0 + 2 * sum_{k=1}^{L} w_k * g_k),   w_k = 1 - k / (L + 1)
//! g_k     = (1/T) * sum_{t=1}^{T-k} (r2_{t+k} - mean(r2)) * (r2_t - mean(r2))
//! ```
//!
//! The autocovariances use divisor `T` for every lag.

use thiserror::Error;

use crate::market_data::ReturnWindow;

/// Default number of returns per round (one-second bars, one-minute rounds).
pub const DEFAULT_WINDOW: usize = 60;
/// Default Bartlett lag truncation.
pub const DEFAULT_LAGS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("return series is empty")]
    Empty,
    #[error("non-finite return {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("lag {lag} out of range for a series of length {len} (need lag <= len - 2)")]
    LagOutOfRange { lag: usize, len: usize },
    #[error("lag truncation {lags} must be smaller than T - 1 = {}", .window.saturating_sub(1))]
    TruncationTooLarge { lags: usize, window: usize },
    #[error("expected {expected} returns, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Moment proxies for a single round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvMoments {
    pub round_id: u64,
    /// Realized variance, the proxy for `E[IV]`.
    pub e_iv: f64,
    /// Long-run variance estimate, the proxy for `Var(IV)`. Never negative.
    pub var_iv: f64,
    /// Set when the raw long-run variance was negative and floored at zero.
    pub floored: bool,
    pub window: usize,
    pub lags: usize,
}

fn check_finite(returns: &[f64]) -> Result<(), EstimatorError> {
    if returns.is_empty() {
        return Err(EstimatorError::Empty);
    }
    match returns.iter().position(|r| !r.is_finite()) {
        Some(index) => Err(EstimatorError::NonFinite {
            index,
            value: returns[index],
        }),
        None => Ok(()),
    }
}

/// Sum of squared log returns.
pub fn realized_variance(returns: &[f64]) -> Result<f64, EstimatorError> {
    check_finite(returns)?;
    Ok(returns.iter().map(|r| r * r).sum())
}

/// Autocovariance of squared returns at lag `k`, divisor `T`.
pub fn sq_return_autocov(returns: &[f64], k: usize) -> Result<f64, EstimatorError> {
    check_finite(returns)?;
    let len = returns.len();
    if len < 2 || k > len - 2 {
        return Err(EstimatorError::LagOutOfRange { lag: k, len });
    }
    let squares: Vec<f64> = returns.iter().map(|r| r * r).collect();
    Ok(autocov_of(&squares, k))
}

fn autocov_of(squares: &[f64], k: usize) -> f64 {
    let t = squares.len() as f64;
    let mean = squares.iter().sum::<f64>() / t;
    squares
        .iter()
        .zip(&squares[k..])
        .map(|(early, late)| (late - mean) * (early - mean))
        .sum::<f64>()
        / t
}

/// Bartlett weights `w_k = 1 - k/(L+1)` for `k = 1..=L`.
pub fn bartlett_weights(lags: usize) -> Vec<f64> {
    let denom = (lags + 1) as f64;
    (1..=lags).map(|k| 1.0 - k as f64 / denom).collect()
}

/// Raw (unfloored) long-run variance of the squared returns, scaled by `T`.
pub fn newey_west_raw(returns: &[f64], window: usize, lags: usize) -> Result<f64, EstimatorError> {
    check_finite(returns)?;
    if returns.len() != window {
        return Err(EstimatorError::LengthMismatch {
            expected: window,
            actual: returns.len(),
        });
    }
    if lags + 1 >= window {
        return Err(EstimatorError::TruncationTooLarge { lags, window });
    }
    let squares: Vec<f64> = returns.iter().map(|r| r * r).collect();
    let weighted: f64 = bartlett_weights(lags)
        .iter()
        .enumerate()
        .map(|(i, w)| w * autocov_of(&squares, i + 1))
        .sum();
    Ok(window as f64 * (autocov_of(&squares, 0) + 2.0 * weighted))
}

/// Long-run variance estimate of `IV`, floored at zero.
///
/// Returns the estimate and whether the floor was applied.
pub fn newey_west_var_iv(
    returns: &[f64],
    window: usize,
    lags: usize,
) -> Result<(f64, bool), EstimatorError> {
    Ok(floor_at_zero(newey_west_raw(returns, window, lags)?))
}

/// Bartlett weighting keeps the estimate nonnegative in exact arithmetic;
/// rounding can still push a near-zero value below zero.
fn floor_at_zero(raw: f64) -> (f64, bool) {
    if raw < 0.0 {
        (0.0, true)
    } else {
        (raw, false)
    }
}

/// Both moment proxies for one round's return window.
pub fn round_moments(window: &ReturnWindow, lags: usize) -> Result<IvMoments, EstimatorError> {
    let t = window.returns.len();
    let e_iv = realized_variance(&window.returns)?;
    let (var_iv, floored) = newey_west_var_iv(&window.returns, t, lags)?;
    Ok(IvMoments {
        round_id: window.round_id,
        e_iv,
        var_iv,
        floored,
        window: t,
        lags,
    })
}
