//! Valuation of express-lane auction rounds from volatility forecasts, and
//! heteroskedastic Tobit estimation of bids on integrated-variance moments.

pub mod analysis;
pub mod auction;
pub mod config;
pub mod market_data;
pub mod mle;
pub mod vol;

pub use auction::{AuctionOutcome, BidderBelief, BidderParams, SimConfig};
pub use market_data::{BidRecord, Candle, CandleSeries, DatasetRow, RoundDataset};
pub use mle::{ErrorFamily, FitOptions, Form, Regressors, TobitFit, TobitParams, TobitSpec};
pub use vol::IvMoments;
