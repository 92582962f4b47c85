//! Valuation of one round of express-lane access and second-price clearing.
//!
//! Arbitrage revenue over a round accrues at the loss-versus-rebalancing rate
//! `L * sqrt(P) / 4 * sigma^2`, so over a short round it is proportional to the
//! integrated variance `IV`. A bidder's net profit from winning is
//! `alpha + beta * IV * sqrt(P)`. Under mean-variance preferences with risk
//! aversion `rho`, the bidder values the round at the certainty equivalent
//!
//! ```text
//! v = alpha + beta * m_iv * sqrt(P) - gamma * v_iv * P,   gamma = rho * beta^2 / 2
//! ```
//!
//! where `m_iv`, `v_iv` are the bidder's forecast mean and variance of `IV`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("price must be positive, got {0}")]
    NonPositivePrice(f64),
    #[error("liquidity must be non-negative, got {0}")]
    NegativeLiquidity(f64),
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("risk aversion must be positive, got {0}")]
    NonPositiveRiskAversion(f64),
    #[error("an auction needs at least one bid")]
    NoBids,
}

fn check_price(price: f64) -> Result<(), ModelError> {
    if price > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositivePrice(price))
    }
}

/// Per-bidder profit parameters. `beta` already absorbs the `L/4` liquidity
/// factor and the bidder's share of the available arbitrage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidderParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
}

impl BidderParams {
    pub fn new(alpha: f64, beta: f64, rho: f64) -> Result<Self, ModelError> {
        if !(rho > 0.0) {
            return Err(ModelError::NonPositiveRiskAversion(rho));
        }
        Ok(Self { alpha, beta, rho })
    }

    /// Risk discount per unit of `v_iv * P`: `rho * beta^2 / 2`.
    pub fn gamma(&self) -> f64 {
        self.rho * self.beta * self.beta / 2.0
    }
}

/// A bidder's forecast of the round's integrated variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidderBelief {
    pub m_iv: f64,
    pub v_iv: f64,
}

/// Instantaneous loss-versus-rebalancing rate of a constant-product pool.
pub fn lvr_rate(liquidity: f64, price: f64, sigma2: f64) -> Result<f64, ModelError> {
    check_price(price)?;
    if liquidity < 0.0 {
        return Err(ModelError::NegativeLiquidity(liquidity));
    }
    if sigma2 < 0.0 {
        return Err(ModelError::NegativeVariance(sigma2));
    }
    Ok(liquidity * price.sqrt() / 4.0 * sigma2)
}

/// Arbitrage reward of a round, with the price frozen at its start.
pub fn round_reward(liquidity: f64, p_start: f64, iv: f64) -> Result<f64, ModelError> {
    lvr_rate(liquidity, p_start, iv)
}

/// Realized net profit from winning a round.
pub fn profit(params: &BidderParams, iv: f64, p_start: f64) -> Result<f64, ModelError> {
    check_price(p_start)?;
    Ok(params.alpha + params.beta * iv * p_start.sqrt())
}

/// Conditional mean and variance of the profit given the bidder's belief.
pub fn profit_moments(
    params: &BidderParams,
    belief: &BidderBelief,
    p_start: f64,
) -> Result<(f64, f64), ModelError> {
    check_price(p_start)?;
    let mean = params.alpha + params.beta * belief.m_iv * p_start.sqrt();
    let var = params.beta * params.beta * belief.v_iv * p_start;
    Ok((mean, var))
}

/// Mean-variance certainty equivalent `E[X] - rho/2 * Var(X)`.
pub fn certainty_equivalent(mean: f64, variance: f64, rho: f64) -> Result<f64, ModelError> {
    if !(rho > 0.0) {
        return Err(ModelError::NonPositiveRiskAversion(rho));
    }
    if variance < 0.0 {
        return Err(ModelError::NegativeVariance(variance));
    }
    Ok(mean - rho / 2.0 * variance)
}

/// Certainty-equivalent valuation of the round in USD.
pub fn valuation(
    params: &BidderParams,
    belief: &BidderBelief,
    p_start: f64,
) -> Result<f64, ModelError> {
    check_price(p_start)?;
    Ok(params.alpha + params.beta * belief.m_iv * p_start.sqrt()
        - params.gamma() * belief.v_iv * p_start)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmittedBid {
    /// Bid in units of the priced asset (USD valuation / price).
    pub amount: f64,
    /// The valuation fell at or below the reserve and the bid was placed at the reserve.
    pub censored: bool,
}

/// Truthful bid: the valuation converted to asset units, floored at the reserve.
pub fn truthful_bid(
    valuation: f64,
    p_start: f64,
    reserve: f64,
) -> Result<SubmittedBid, ModelError> {
    check_price(p_start)?;
    let amount = valuation / p_start;
    Ok(if amount <= reserve {
        SubmittedBid {
            amount: reserve,
            censored: true,
        }
    } else {
        SubmittedBid {
            amount,
            censored: false,
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub round_id: u64,
    pub winner: Option<usize>,
    /// Zero when there is no winner.
    pub payment: f64,
    pub all_bids: Vec<f64>,
}

/// Sealed-bid second-price clearing with a reserve. Ties go to the lowest index.
pub fn clear_auction(
    round_id: u64,
    bids: &[f64],
    reserve: f64,
) -> Result<AuctionOutcome, ModelError> {
    if bids.is_empty() {
        return Err(ModelError::NoBids);
    }
    let mut best = 0;
    for (i, &b) in bids.iter().enumerate().skip(1) {
        if b > bids[best] {
            best = i;
        }
    }
    let (winner, payment) = if bids[best] > reserve {
        let second = bids
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, &b)| b)
            .fold(f64::NEG_INFINITY, f64::max);
        (Some(best), second.max(reserve))
    } else {
        (None, 0.0)
    };
    Ok(AuctionOutcome {
        round_id,
        winner,
        payment,
        all_bids: bids.to_vec(),
    })
}

/// Realized payoff of bidder 0 who values the round at `value`, bids `bid`
/// and faces the fixed `opponents`.
pub fn second_price_payoff(
    value: f64,
    bid: f64,
    opponents: &[f64],
    reserve: f64,
) -> Result<f64, ModelError> {
    let mut bids = Vec::with_capacity(opponents.len() + 1);
    bids.push(bid);
    bids.extend_from_slice(opponents);
    let outcome = clear_auction(0, &bids, reserve)?;
    Ok(match outcome.winner {
        Some(0) => value - outcome.payment,
        _ => 0.0,
    })
}
