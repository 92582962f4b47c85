//! Synthetic auction environments with known ground truth.
//!
//! Log per-round variance follows a stationary AR(1),
//!
//! ```text
//! h_r = mu + phi * (h_{r-1} - mu) + s_r * e_r,   s_r = s * exp(kappa * xi_r),   IV_r = exp(h_r)
//! ```
//!
//! with `e_r, xi_r` iid standard normal and `xi_r` public before the round's
//! deadline. Conditional on `h_{r-1}` and `s_r`, `IV_r` is lognormal, which
//! gives exact `E[IV_r]` and `Var(IV_r)` for beliefs and regressors.
//!
//! [`simulate_rounds`] draws reduced-form bids straight from the censored
//! regression model; [`simulate_market`] produces one-second candles and
//! truthful bids from risk-averse bidders, as raw files would look.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use thiserror::Error;

use super::model::{
    clear_auction, truthful_bid, valuation, AuctionOutcome, BidderBelief, BidderParams, ModelError,
};
use crate::config::{ConfigError, KeyValues};
use crate::market_data::{
    BidRecord, Candle, DatasetRow, RoundDataset, RESERVE_WEI, ROUND_MS, X1_SCALE, X2_SCALE,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolProcess {
    /// Mean of the log per-round integrated variance.
    pub log_var_mean: f64,
    pub persistence: f64,
    pub innovation_sd: f64,
    /// Dispersion `kappa` of the per-round innovation scale; 0 gives a plain Gaussian AR(1).
    pub vol_of_vol: f64,
}

impl Default for VolProcess {
    fn default() -> Self {
        Self {
            log_var_mean: (3e-6f64).ln(),
            persistence: 0.9,
            innovation_sd: 0.3,
            vol_of_vol: 0.5,
        }
    }
}

impl VolProcess {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.persistence > -1.0 && self.persistence < 1.0) {
            return Err(SimError::Invalid(format!(
                "persistence {} must lie in (-1, 1)",
                self.persistence
            )));
        }
        if !(self.innovation_sd > 0.0) || !(self.vol_of_vol >= 0.0) {
            return Err(SimError::Invalid(
                "innovation_sd must be positive and vol_of_vol non-negative".into(),
            ));
        }
        if !self.log_var_mean.is_finite() {
            return Err(SimError::Invalid("log_var_mean must be finite".into()));
        }
        Ok(())
    }

    /// Stationary mean and variance of the log variance `h`.
    pub fn stationary_log_var(&self) -> (f64, f64) {
        let k2 = self.vol_of_vol * self.vol_of_vol;
        let innov_var = self.innovation_sd.powi(2) * (2.0 * k2).exp();
        (
            self.log_var_mean,
            innov_var / (1.0 - self.persistence * self.persistence),
        )
    }

    /// Stationary mean and variance of `IV = exp(h)`. Exact when `vol_of_vol = 0`
    /// (then `h` is Gaussian); a lognormal approximation otherwise.
    pub fn stationary_iv_moments(&self) -> (f64, f64) {
        let (m, v) = self.stationary_log_var();
        ((m + v / 2.0).exp(), (v.exp() - 1.0) * (2.0 * m + v).exp())
    }

    /// `E[IV_r]` and `Var(IV_r)` given the previous log variance and this round's
    /// innovation scale.
    pub fn conditional_iv_moments(&self, prev_log_var: f64, innovation_sd: f64) -> (f64, f64) {
        let m = self.log_var_mean + self.persistence * (prev_log_var - self.log_var_mean);
        let s2 = innovation_sd * innovation_sd;
        ((m + s2 / 2.0).exp(), s2.exp_m1() * (2.0 * m + s2).exp())
    }
}

/// Profit and belief parameters of the structural market simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralParams {
    /// USD.
    pub alpha: f64,
    /// USD per unit of `IV * sqrt(P)`.
    pub beta: f64,
    pub rho: f64,
    /// Log-scale spread of `beta` and `rho` across bidders.
    pub param_dispersion: f64,
    /// Log-scale noise of private forecasts around the true conditional moments.
    pub belief_noise: f64,
    pub bars_per_round: usize,
}

impl Default for StructuralParams {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 1e5,
            rho: 0.5,
            param_dispersion: 0.1,
            belief_noise: 0.2,
            bars_per_round: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_rounds: usize,
    pub n_bidders: usize,
    /// Censoring point in scaled bid units (1.0 = 0.001 ETH).
    pub reserve: f64,
    pub theta: [f64; 3],
    /// Log-scale coefficients on `(1, log x1, log x2)`.
    pub scale: [f64; 3],
    pub nu: f64,
    pub vol: VolProcess,
    pub price0: f64,
    pub seed: u64,
    pub start_ms: i64,
    pub first_round: u64,
    pub burn_in: usize,
    pub structural: StructuralParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_rounds: 50_000,
            n_bidders: 2,
            reserve: 1.0,
            theta: [1.0, 0.35, -2.1],
            scale: [-2.3, 1.1, -0.3],
            nu: 1.3,
            vol: VolProcess::default(),
            price0: 3000.0,
            seed: 20_250_501,
            // 2025-05-01T00:00:00Z
            start_ms: 1_746_057_600_000,
            first_round: 1,
            burn_in: 100,
            structural: StructuralParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.vol.validate()?;
        if self.n_bidders < 2 {
            return Err(SimError::Invalid("n_bidders must be at least 2".into()));
        }
        if self.n_rounds == 0 {
            return Err(SimError::Invalid("n_rounds must be positive".into()));
        }
        if !(self.nu > 0.0) {
            return Err(SimError::Invalid("nu must be positive".into()));
        }
        if !(self.price0 > 0.0) {
            return Err(SimError::Invalid("price0 must be positive".into()));
        }
        if !(self.structural.rho > 0.0) || self.structural.bars_per_round < 2 {
            return Err(SimError::Invalid(
                "rho must be positive and bars_per_round at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Reads the simulation keys of a `key = value` file, defaulting the rest.
    pub fn from_kv(kv: &KeyValues) -> Result<Self, SimError> {
        let d = Self::default();
        let sd = d.structural;
        let cfg = Self {
            n_rounds: kv.get_or("n_rounds", d.n_rounds)?,
            n_bidders: kv.get_or("n_bidders", d.n_bidders)?,
            reserve: kv.get_or("reserve", d.reserve)?,
            theta: kv.get_triple("theta", d.theta)?,
            scale: kv.get_triple("scale", d.scale)?,
            nu: kv.get_or("nu", d.nu)?,
            vol: VolProcess {
                log_var_mean: kv.get_or("log_var_mean", d.vol.log_var_mean)?,
                persistence: kv.get_or("persistence", d.vol.persistence)?,
                innovation_sd: kv.get_or("innovation_sd", d.vol.innovation_sd)?,
                vol_of_vol: kv.get_or("vol_of_vol", d.vol.vol_of_vol)?,
            },
            price0: kv.get_or("price0", d.price0)?,
            seed: kv.get_or("seed", d.seed)?,
            start_ms: kv.get_or("start_ms", d.start_ms)?,
            first_round: kv.get_or("first_round", d.first_round)?,
            burn_in: kv.get_or("burn_in", d.burn_in)?,
            structural: StructuralParams {
                alpha: kv.get_or("alpha", sd.alpha)?,
                beta: kv.get_or("beta", sd.beta)?,
                rho: kv.get_or("rho", sd.rho)?,
                param_dispersion: kv.get_or("param_dispersion", sd.param_dispersion)?,
                belief_noise: kv.get_or("belief_noise", sd.belief_noise)?,
                bars_per_round: kv.get_or("bars_per_round", sd.bars_per_round)?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Latent state of one simulated round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRound {
    pub round_id: u64,
    pub round_start_ms: i64,
    pub p_start: f64,
    pub log_var: f64,
    pub innovation_sd: f64,
    pub iv: f64,
    pub e_iv: f64,
    pub var_iv: f64,
}

/// Generator parameters and realized bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta: [f64; 3],
    pub scale: [f64; 3],
    pub nu: f64,
    pub reserve: f64,
    pub seed: u64,
    pub n_rounds: usize,
    pub n_bidders: usize,
    pub n_rows: usize,
    pub n_censored: usize,
}

impl GroundTruth {
    pub fn location(&self, x1: f64, x2: f64) -> f64 {
        self.theta[0] + self.theta[1] * x1 + self.theta[2] * x2
    }

    pub fn scale_at(&self, x1: f64, x2: f64) -> f64 {
        (self.scale[0] + self.scale[1] * x1.ln() + self.scale[2] * x2.ln()).exp()
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "parameter,value")?;
        for (i, v) in self.theta.iter().enumerate() {
            writeln!(w, "theta{i},{v}")?;
        }
        for (i, v) in self.scale.iter().enumerate() {
            writeln!(w, "gamma{i},{v}")?;
        }
        writeln!(w, "nu,{}", self.nu)?;
        writeln!(w, "reserve,{}", self.reserve)?;
        writeln!(w, "seed,{}", self.seed)?;
        writeln!(w, "n_rounds,{}", self.n_rounds)?;
        writeln!(w, "n_bidders,{}", self.n_bidders)?;
        writeln!(w, "n_rows,{}", self.n_rows)?;
        writeln!(w, "n_censored,{}", self.n_censored)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub dataset: RoundDataset,
    pub truth: GroundTruth,
    pub rounds: Vec<SimRound>,
    pub outcomes: Vec<AuctionOutcome>,
}

fn bidder_addresses(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b1dd_e125);
    let mut out: Vec<String> = (0..n)
        .map(|_| {
            let mut bytes = [0u8; 20];
            rng.fill_bytes(&mut bytes);
            let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
            format!("0x{hex}")
        })
        .collect();
    out.sort();
    out
}

/// Drives the volatility and price state round by round.
struct VolState<'a> {
    cfg: &'a SimConfig,
    log_var: f64,
    price: f64,
}

impl<'a> VolState<'a> {
    fn new(cfg: &'a SimConfig, rng: &mut ChaCha8Rng) -> Self {
        let (m, v) = cfg.vol.stationary_log_var();
        let z: f64 = rng.sample(StandardNormal);
        let mut state = Self {
            cfg,
            log_var: m + v.sqrt() * z,
            price: cfg.price0,
        };
        for _ in 0..cfg.burn_in {
            state.step(rng);
        }
        state.price = cfg.price0;
        state
    }

    /// Draws the next round's variance and returns its moments. Price is not advanced.
    fn step(&mut self, rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
        let vol = &self.cfg.vol;
        let xi: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let s = vol.innovation_sd * (vol.vol_of_vol * xi).exp();
        let (e_iv, var_iv) = vol.conditional_iv_moments(self.log_var, s);
        let mean = vol.log_var_mean + vol.persistence * (self.log_var - vol.log_var_mean);
        self.log_var = mean + s * e;
        (s, self.log_var.exp(), e_iv, var_iv)
    }
}

/// Reduced-form generator: latent `v* = theta . (1, x1, x2) + sigma * t(nu)`,
/// `log sigma = gamma . (1, log x1, log x2)`, observed bid `max(C, v*)`.
pub fn simulate_rounds(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t_dist = StudentT::new(cfg.nu).map_err(|e| SimError::Invalid(e.to_string()))?;
    let bidders = bidder_addresses(cfg.seed, cfg.n_bidders);
    let mut state = VolState::new(cfg, &mut rng);

    let mut rows = Vec::with_capacity(cfg.n_rounds * cfg.n_bidders);
    let mut rounds = Vec::with_capacity(cfg.n_rounds);
    let mut outcomes = Vec::with_capacity(cfg.n_rounds);
    let mut bids = vec![0.0; cfg.n_bidders];
    for r in 0..cfg.n_rounds {
        let round_id = cfg.first_round + r as u64;
        let round_start_ms = cfg.start_ms + r as i64 * ROUND_MS;
        let p_start = state.price;
        let (s, iv, e_iv, var_iv) = state.step(&mut rng);
        let x1 = e_iv / p_start.sqrt() * X1_SCALE;
        let x2 = var_iv * X2_SCALE;
        let loc = cfg.theta[0] + cfg.theta[1] * x1 + cfg.theta[2] * x2;
        let sigma = (cfg.scale[0] + cfg.scale[1] * x1.ln() + cfg.scale[2] * x2.ln()).exp();
        for (i, bidder) in bidders.iter().enumerate() {
            let latent = loc + sigma * t_dist.sample(&mut rng);
            let censored = latent <= cfg.reserve;
            let bid = if censored { cfg.reserve } else { latent };
            bids[i] = bid;
            rows.push(DatasetRow {
                round_id,
                bidder: bidder.clone(),
                bid_scaled: bid,
                censored,
                x1,
                x2,
                p_start,
                round_start_ms,
            });
        }
        outcomes.push(clear_auction(round_id, &bids, cfg.reserve)?);
        rounds.push(SimRound {
            round_id,
            round_start_ms,
            p_start,
            log_var: iv.ln(),
            innovation_sd: s,
            iv,
            e_iv,
            var_iv,
        });
        let z: f64 = rng.sample(StandardNormal);
        state.price *= (iv.sqrt() * z - iv / 2.0).exp();
    }

    let dataset = RoundDataset::new(rows);
    let truth = GroundTruth {
        theta: cfg.theta,
        scale: cfg.scale,
        nu: cfg.nu,
        reserve: cfg.reserve,
        seed: cfg.seed,
        n_rounds: cfg.n_rounds,
        n_bidders: cfg.n_bidders,
        n_rows: dataset.len(),
        n_censored: dataset.n_censored(),
    };
    Ok(SimOutput {
        dataset,
        truth,
        rounds,
        outcomes,
    })
}

/// Raw-file view of a structural simulation.
#[derive(Debug, Clone)]
pub struct MarketSim {
    pub candles: Vec<Candle>,
    pub bids: Vec<BidRecord>,
    pub outcomes: Vec<AuctionOutcome>,
    pub rounds: Vec<SimRound>,
    pub bidders: Vec<(String, BidderParams)>,
}

/// Structural generator: one-second candles plus truthful bids from
/// mean-variance bidders with noisy private forecasts.
pub fn simulate_market(cfg: &SimConfig) -> Result<MarketSim, SimError> {
    cfg.validate()?;
    let sp = cfg.structural;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names = bidder_addresses(cfg.seed, cfg.n_bidders);
    let mut bidders = Vec::with_capacity(cfg.n_bidders);
    for name in names {
        let zb: f64 = rng.sample(StandardNormal);
        let zr: f64 = rng.sample(StandardNormal);
        let params = BidderParams::new(
            sp.alpha,
            sp.beta * (sp.param_dispersion * zb).exp(),
            sp.rho * (sp.param_dispersion * zr).exp(),
        )?;
        bidders.push((name, params));
    }

    let bar_ms = ROUND_MS / sp.bars_per_round as i64;
    let reserve_eth = RESERVE_WEI as f64 / 1e18;
    let noise = sp.belief_noise;
    let mut state = VolState::new(cfg, &mut rng);
    let mut candles = Vec::with_capacity(cfg.n_rounds * sp.bars_per_round + 1);
    let mut bids = Vec::with_capacity(cfg.n_rounds * cfg.n_bidders);
    let mut outcomes = Vec::with_capacity(cfg.n_rounds);
    let mut rounds = Vec::with_capacity(cfg.n_rounds);
    let mut amounts = vec![0.0; cfg.n_bidders];

    let mut push_bar = |rng: &mut ChaCha8Rng, t: i64, open: f64, ret: f64| -> f64 {
        let close = open * ret.exp();
        let wick_hi: f64 = rng.sample::<f64, _>(StandardNormal).abs() * 1e-5;
        let wick_lo: f64 = rng.sample::<f64, _>(StandardNormal).abs() * 1e-5;
        let volume: f64 = (rng.sample::<f64, _>(StandardNormal)).exp() * 10.0;
        candles.push(Candle {
            open_time: t,
            open,
            high: open.max(close) * (1.0 + wick_hi),
            low: open.min(close) * (1.0 - wick_lo),
            close,
            volume,
        });
        close
    };

    for r in 0..cfg.n_rounds {
        let round_id = cfg.first_round + r as u64;
        let round_start_ms = cfg.start_ms + r as i64 * ROUND_MS;
        let p_start = state.price;
        let (s, iv, e_iv, var_iv) = state.step(&mut rng);

        for (i, (name, params)) in bidders.iter().enumerate() {
            let zm: f64 = rng.sample(StandardNormal);
            let zv: f64 = rng.sample(StandardNormal);
            let belief = BidderBelief {
                m_iv: e_iv * (noise * zm - noise * noise / 2.0).exp(),
                v_iv: var_iv * (noise * zv - noise * noise / 2.0).exp(),
            };
            let v = valuation(params, &belief, p_start)?;
            let submitted = truthful_bid(v, p_start, reserve_eth)?;
            let wei = if submitted.censored {
                RESERVE_WEI
            } else {
                (submitted.amount * 1e18).round() as u128
            };
            amounts[i] = submitted.amount;
            bids.push(BidRecord::new(round_id, name.clone(), wei, round_start_ms));
        }
        outcomes.push(clear_auction(round_id, &amounts, reserve_eth)?);

        let bar_sd = (iv / sp.bars_per_round as f64).sqrt();
        let mut price = p_start;
        for k in 0..sp.bars_per_round {
            let z: f64 = rng.sample(StandardNormal);
            price = push_bar(
                &mut rng,
                round_start_ms + k as i64 * bar_ms,
                price,
                bar_sd * z - bar_sd * bar_sd / 2.0,
            );
        }
        state.price = price;
        rounds.push(SimRound {
            round_id,
            round_start_ms,
            p_start,
            log_var: iv.ln(),
            innovation_sd: s,
            iv,
            e_iv,
            var_iv,
        });
    }
    // Closing bar so the last round's window is complete.
    let end = cfg.start_ms + cfg.n_rounds as i64 * ROUND_MS;
    let last = state.price;
    push_bar(&mut rng, end, last, 0.0);

    Ok(MarketSim {
        candles,
        bids,
        outcomes,
        rounds,
        bidders,
    })
}
