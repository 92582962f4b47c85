//! Bidder valuation, second-price clearing and synthetic auction data.

pub mod model;
pub mod sim;

pub use model::{
    certainty_equivalent, clear_auction, lvr_rate, profit, profit_moments, round_reward,
    second_price_payoff, truthful_bid, valuation, AuctionOutcome, BidderBelief, BidderParams,
    ModelError, SubmittedBid,
};
pub use sim::{
    simulate_market, simulate_rounds, GroundTruth, MarketSim, SimConfig, SimError, SimOutput,
    SimRound, StructuralParams, VolProcess,
};
