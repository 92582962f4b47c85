//! Candle and bid ingestion, per-round return windows and the regression dataset.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::vol::{self, EstimatorError, IvMoments};

/// Length of an auction round.
pub const ROUND_MS: i64 = 60_000;
/// Bid submission closes this long before the round starts. Metadata only.
pub const DEADLINE_OFFSET_MS: i64 = 15_000;
/// Reserve price, 0.001 ETH.
pub const RESERVE_WEI: u128 = 1_000_000_000_000_000;
/// Wei per scaled bid unit (`bid_scaled = bid_wei * 1e-15`).
pub const WEI_PER_BID_UNIT: f64 = 1e15;
/// Multiplier applied to `E[IV] / sqrt(P)`.
pub const X1_SCALE: f64 = 1e9;
/// Multiplier applied to `Var(IV)`.
pub const X2_SCALE: f64 = 1e12;
pub const DEFAULT_BAR_MS: i64 = 1_000;
/// Maximum number of forward-filled bars tolerated in one round window.
pub const DEFAULT_MAX_FILL: usize = 5;
/// Largest wei amount whose scaled value round-trips exactly through `f64`.
pub const EXACT_WEI_BOUND: u128 = 1 << 53;

pub const CANDLE_HEADER: [&str; 6] = ["open_time_ms", "open", "high", "low", "close", "volume"];
pub const BID_HEADER: [&str; 4] = ["round_id", "bidder", "bid_wei", "round_start_ms"];
pub const DATASET_HEADER: [&str; 8] = [
    "round_id",
    "bidder",
    "bid_scaled",
    "censored",
    "x1",
    "x2",
    "p_start",
    "round_start_ms",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    Header {
        line: u64,
        expected: String,
        found: String,
    },
    #[error("line {line}: cannot parse {field} from `{value}`")]
    Parse {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: non-positive price {value} in {field}")]
    NonPositivePrice {
        line: u64,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: negative bid {value}")]
    NegativeBid { line: u64, value: String },
    #[error("open_time {open_time} is not aligned to the {bar_ms} ms grid starting at {origin}")]
    Misaligned {
        open_time: i64,
        origin: i64,
        bar_ms: i64,
    },
    #[error("round {round_id}: bids disagree on the round start ({first} vs {second})")]
    InconsistentRound {
        round_id: u64,
        first: i64,
        second: i64,
    },
    #[error("round {round_id}: insufficient candle coverage ({reason})")]
    Coverage { round_id: u64, reason: String },
    #[error("empty candle series")]
    EmptySeries,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candle {
    pub open_time: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

/// A sorted, deduplicated run of fixed-interval bars.
#[derive(Debug, Clone, PartialEq)]
pub struct CandleSeries {
    pub bar_ms: i64,
    pub candles: Vec<Candle>,
    /// Grid timestamps between the first and last bar that have no candle.
    pub gaps: Vec<i64>,
    /// Number of rows dropped because their `open_time` was already present.
    pub duplicates: usize,
}

impl CandleSeries {
    /// Sorts (stably), keeps the first occurrence of each timestamp and
    /// records grid gaps. Prices are assumed validated.
    pub fn from_candles(bar_ms: i64, mut candles: Vec<Candle>) -> Result<Self, DataError> {
        if candles.is_empty() {
            return Err(DataError::EmptySeries);
        }
        candles.sort_by_key(|c| c.open_time);
        let before = candles.len();
        candles.dedup_by_key(|c| c.open_time);
        let duplicates = before - candles.len();

        let origin = candles[0].open_time;
        if let Some(c) = candles
            .iter()
            .find(|c| (c.open_time - origin) % bar_ms != 0)
        {
            return Err(DataError::Misaligned {
                open_time: c.open_time,
                origin,
                bar_ms,
            });
        }
        let mut gaps = Vec::new();
        for pair in candles.windows(2) {
            let mut t = pair[0].open_time + bar_ms;
            while t < pair[1].open_time {
                gaps.push(t);
                t += bar_ms;
            }
        }
        Ok(Self {
            bar_ms,
            candles,
            gaps,
            duplicates,
        })
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn first_time(&self) -> i64 {
        self.candles[0].open_time
    }

    pub fn last_time(&self) -> i64 {
        self.candles[self.candles.len() - 1].open_time
    }

    pub fn get(&self, open_time: i64) -> Option<&Candle> {
        self.candles
            .binary_search_by_key(&open_time, |c| c.open_time)
            .ok()
            .map(|i| &self.candles[i])
    }

    /// Latest candle strictly before `open_time`.
    fn last_before(&self, open_time: i64) -> Option<&Candle> {
        let idx = self.candles.partition_point(|c| c.open_time < open_time);
        idx.checked_sub(1).map(|i| &self.candles[i])
    }
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    field: &'static str,
    line: u64,
) -> Result<T, DataError> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| DataError::Parse {
        line,
        field,
        value: raw.to_string(),
    })
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), DataError> {
    let found = reader.headers()?.clone();
    let found_names: Vec<&str> = found.iter().map(str::trim).collect();
    if found_names.len() < expected.len() || found_names[..expected.len()] != *expected {
        return Err(DataError::Header {
            line: 1,
            expected: expected.join(","),
            found: found_names.join(","),
        });
    }
    Ok(())
}

/// Parses a candles CSV (`open_time_ms,open,high,low,close,volume`).
pub fn read_candles(reader: impl Read, bar_ms: i64) -> Result<CandleSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    check_header(&mut rdr, &CANDLE_HEADER)?;
    let mut candles = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let open_time = parse_field(&record, 0, "open_time_ms", line)?;
        let mut prices = [0.0; 4];
        for (i, (slot, name)) in prices
            .iter_mut()
            .zip(["open", "high", "low", "close"])
            .enumerate()
        {
            let value: f64 = parse_field(&record, i + 1, name, line)?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(DataError::NonPositivePrice {
                    line,
                    field: name,
                    value,
                });
            }
            *slot = value;
        }
        let volume = parse_field(&record, 5, "volume", line)?;
        candles.push(Candle {
            open_time,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
            volume,
        });
    }
    let series = CandleSeries::from_candles(bar_ms, candles)?;
    if series.duplicates > 0 {
        log::warn!("dropped {} duplicate candle rows", series.duplicates);
    }
    if !series.gaps.is_empty() {
        log::warn!("candle series has {} missing bars", series.gaps.len());
    }
    Ok(series)
}

pub fn load_candles(path: impl AsRef<Path>, bar_ms: i64) -> Result<CandleSeries, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_candles(file, bar_ms)
}

pub fn write_candles(writer: impl Write, candles: &[Candle]) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(CANDLE_HEADER)?;
    for c in candles {
        w.write_record([
            c.open_time.to_string(),
            c.open.to_string(),
            c.high.to_string(),
            c.low.to_string(),
            c.close.to_string(),
            c.volume.to_string(),
        ])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))?;
    Ok(())
}

/// One bidder's bid for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidRecord {
    pub round_id: u64,
    pub bidder: String,
    pub bid_wei: u128,
    pub round_start: i64,
    /// `round_start - 15 s`; not used in estimation.
    pub deadline: i64,
    /// `bid_wei <= RESERVE_WEI`.
    pub censored: bool,
}

impl BidRecord {
    pub fn new(round_id: u64, bidder: impl Into<String>, bid_wei: u128, round_start: i64) -> Self {
        Self {
            round_id,
            bidder: bidder.into(),
            bid_wei,
            round_start,
            deadline: round_start - DEADLINE_OFFSET_MS,
            censored: bid_wei <= RESERVE_WEI,
        }
    }

    /// Bid in units of 1e15 wei.
    pub fn bid_scaled(&self) -> f64 {
        self.bid_wei as f64 / WEI_PER_BID_UNIT
    }
}

/// Parses a bids CSV (`round_id,bidder,bid_wei,round_start_ms`).
///
/// Records come back sorted by `(round_id, bidder)`. Duplicate
/// `(round, bidder)` pairs keep the larger bid.
pub fn read_bids(reader: impl Read) -> Result<Vec<BidRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    check_header(&mut rdr, &BID_HEADER)?;
    let mut by_key: BTreeMap<(u64, String), BidRecord> = BTreeMap::new();
    let mut round_starts: HashMap<u64, i64> = HashMap::new();
    let mut duplicates = 0usize;
    let mut inexact = 0usize;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let round_id: u64 = parse_field(&record, 0, "round_id", line)?;
        let bidder = record.get(1).unwrap_or("").trim().to_string();
        let raw_bid = record.get(2).unwrap_or("").trim();
        if raw_bid.starts_with('-') {
            return Err(DataError::NegativeBid {
                line,
                value: raw_bid.to_string(),
            });
        }
        let bid_wei: u128 = parse_field(&record, 2, "bid_wei", line)?;
        let round_start: i64 = parse_field(&record, 3, "round_start_ms", line)?;
        if let Some(&first) = round_starts.get(&round_id) {
            if first != round_start {
                return Err(DataError::InconsistentRound {
                    round_id,
                    first,
                    second: round_start,
                });
            }
        } else {
            round_starts.insert(round_id, round_start);
        }
        if bid_wei > EXACT_WEI_BOUND {
            inexact += 1;
        }
        let rec = BidRecord::new(round_id, bidder.clone(), bid_wei, round_start);
        match by_key.entry((round_id, bidder)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(rec);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                duplicates += 1;
                if rec.bid_wei > o.get().bid_wei {
                    o.insert(rec);
                }
            }
        }
    }
    if duplicates > 0 {
        log::warn!("merged {duplicates} duplicate (round, bidder) bids, keeping the maximum");
    }
    if inexact > 0 {
        log::warn!("{inexact} bids exceed 2^53 wei; their scaled values are rounded to f64");
    }
    Ok(by_key.into_values().collect())
}

pub fn load_bids(path: impl AsRef<Path>) -> Result<Vec<BidRecord>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_bids(file)
}

pub fn write_bids(writer: impl Write, bids: &[BidRecord]) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(BID_HEADER)?;
    for b in bids {
        w.write_record([
            b.round_id.to_string(),
            b.bidder.clone(),
            b.bid_wei.to_string(),
            b.round_start.to_string(),
        ])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))?;
    Ok(())
}

/// The `T` log returns of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnWindow {
    pub round_id: u64,
    pub returns: Vec<f64>,
    /// Open of the round's first bar.
    pub p_start: f64,
    /// Bars missing from the feed and forward-filled with the previous close.
    pub fill_count: usize,
}

/// Extracts the closes at `round_start + k * bar_ms`, `k = 0..=window`, and
/// differences their logs.
pub fn round_returns(
    candles: &CandleSeries,
    round_id: u64,
    round_start: i64,
    window: usize,
    max_fill: usize,
) -> Result<ReturnWindow, DataError> {
    let bar = candles.bar_ms;
    let end = round_start + window as i64 * bar;
    let coverage = |reason: String| DataError::Coverage { round_id, reason };
    if candles.is_empty() || end > candles.last_time() {
        return Err(coverage(format!("series ends before {end}")));
    }

    let mut fill_count = 0usize;
    let (mut prev_close, p_start) = match candles.get(round_start) {
        Some(c) => (c.close, c.open),
        None => {
            let c = candles
                .last_before(round_start)
                .filter(|c| round_start - c.open_time <= bar * max_fill as i64)
                .ok_or_else(|| coverage(format!("no bar at or shortly before {round_start}")))?;
            fill_count += 1;
            (c.close, c.close)
        }
    };
    let mut returns = Vec::with_capacity(window);
    for k in 1..=window as i64 {
        let close = match candles.get(round_start + k * bar) {
            Some(c) => c.close,
            None => {
                fill_count += 1;
                prev_close
            }
        };
        returns.push(close.ln() - prev_close.ln());
        prev_close = close;
    }
    if fill_count > max_fill {
        return Err(coverage(format!(
            "{fill_count} missing bars exceed the limit of {max_fill}"
        )));
    }
    Ok(ReturnWindow {
        round_id,
        returns,
        p_start,
        fill_count,
    })
}

/// Regression features of a round: `x1 = E[IV]/sqrt(P) * 1e9`, `x2 = Var(IV) * 1e12`.
pub fn round_features(moments: &IvMoments, p_start: f64) -> (f64, f64) {
    (
        moments.e_iv / p_start.sqrt() * X1_SCALE,
        moments.var_iv * X2_SCALE,
    )
}

/// One `(round, bidder)` observation of the regression design.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub round_id: u64,
    pub bidder: String,
    pub bid_scaled: f64,
    pub censored: bool,
    pub x1: f64,
    pub x2: f64,
    pub p_start: f64,
    pub round_start_ms: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundDataset {
    pub rows: Vec<DatasetRow>,
}

impl RoundDataset {
    pub fn new(rows: Vec<DatasetRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_censored(&self) -> usize {
        self.rows.iter().filter(|r| r.censored).count()
    }

    /// Distinct bidders in first-appearance order.
    pub fn bidders(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.bidder) {
                seen.push(r.bidder.clone());
            }
        }
        seen
    }

    pub fn for_bidder(&self, bidder: &str) -> RoundDataset {
        self.filter(|r| r.bidder == bidder)
    }

    pub fn filter(&self, mut keep: impl FnMut(&DatasetRow) -> bool) -> RoundDataset {
        RoundDataset::new(self.rows.iter().filter(|r| keep(r)).cloned().collect())
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), DataError> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        w.write_record(DATASET_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.round_id.to_string(),
                r.bidder.clone(),
                r.bid_scaled.to_string(),
                r.censored.to_string(),
                r.x1.to_string(),
                r.x2.to_string(),
                r.p_start.to_string(),
                r.round_start_ms.to_string(),
            ])?;
        }
        w.flush().map_err(|e| DataError::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        check_header(&mut rdr, &DATASET_HEADER)?;
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push(DatasetRow {
                round_id: parse_field(&record, 0, "round_id", line)?,
                bidder: record.get(1).unwrap_or("").to_string(),
                bid_scaled: parse_field(&record, 2, "bid_scaled", line)?,
                censored: parse_field(&record, 3, "censored", line)?,
                x1: parse_field(&record, 4, "x1", line)?,
                x2: parse_field(&record, 5, "x2", line)?,
                p_start: parse_field(&record, 6, "p_start", line)?,
                round_start_ms: parse_field(&record, 7, "round_start_ms", line)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        Self::read_csv(File::open(path).map_err(io_err(path))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        self.write_csv(File::create(path).map_err(io_err(path))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetOptions {
    pub window: usize,
    pub lags: usize,
    pub lagged: bool,
    pub max_fill: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            window: vol::DEFAULT_WINDOW,
            lags: vol::DEFAULT_LAGS,
            lagged: false,
            max_fill: DEFAULT_MAX_FILL,
        }
    }
}

/// Bookkeeping from [`build_dataset`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetReport {
    pub rounds: usize,
    /// Rows dropped under `lagged` because round `r - 1` is absent or uncovered.
    pub dropped_no_predecessor: usize,
    /// Rows dropped because their own round lacked candle coverage.
    pub dropped_coverage: usize,
    /// Rounds whose long-run variance estimate was floored at zero.
    pub floored_rounds: usize,
    pub filled_bars: usize,
}

/// Moments of a single round together with its reference price.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMoments {
    pub round_id: u64,
    pub round_start: i64,
    pub p_start: f64,
    pub fill_count: usize,
    pub moments: IvMoments,
}

/// Computes moments for each distinct round present in `bids`, in round order.
pub fn compute_round_moments(
    bids: &[BidRecord],
    candles: &CandleSeries,
    window: usize,
    lags: usize,
    max_fill: usize,
) -> Vec<(u64, Result<RoundMoments, DataError>)> {
    let rounds: BTreeMap<u64, i64> = bids.iter().map(|b| (b.round_id, b.round_start)).collect();
    let rounds: Vec<(u64, i64)> = rounds.into_iter().collect();
    rounds
        .par_iter()
        .map(|&(round_id, round_start)| {
            let result =
                round_returns(candles, round_id, round_start, window, max_fill).and_then(|w| {
                    let moments = vol::round_moments(&w, lags)?;
                    Ok(RoundMoments {
                        round_id,
                        round_start,
                        p_start: w.p_start,
                        fill_count: w.fill_count,
                        moments,
                    })
                });
            (round_id, result)
        })
        .collect()
}

/// Joins bids with their round's (or the previous round's) moment features.
pub fn build_dataset(
    bids: &[BidRecord],
    candles: &CandleSeries,
    opts: &DatasetOptions,
) -> Result<(RoundDataset, DatasetReport), DataError> {
    let per_round = compute_round_moments(bids, candles, opts.window, opts.lags, opts.max_fill);
    let mut report = DatasetReport {
        rounds: per_round.len(),
        ..Default::default()
    };
    let mut moments: HashMap<u64, RoundMoments> = HashMap::new();
    for (round_id, result) in per_round {
        match result {
            Ok(m) => {
                report.filled_bars += m.fill_count;
                report.floored_rounds += usize::from(m.moments.floored);
                moments.insert(round_id, m);
            }
            Err(DataError::Coverage { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let mut rows = Vec::with_capacity(bids.len());
    for bid in bids {
        let Some(own) = moments.get(&bid.round_id) else {
            report.dropped_coverage += 1;
            continue;
        };
        let source = if opts.lagged {
            match bid.round_id.checked_sub(1).and_then(|r| moments.get(&r)) {
                Some(prev) => prev,
                None => {
                    report.dropped_no_predecessor += 1;
                    continue;
                }
            }
        } else {
            own
        };
        let (x1, x2) = round_features(&source.moments, source.p_start);
        rows.push(DatasetRow {
            round_id: bid.round_id,
            bidder: bid.bidder.clone(),
            bid_scaled: bid.bid_scaled(),
            censored: bid.censored,
            x1,
            x2,
            p_start: own.p_start,
            round_start_ms: bid.round_start,
        });
    }
    if report.dropped_coverage > 0 {
        log::warn!(
            "{} rows dropped for missing candle coverage",
            report.dropped_coverage
        );
    }
    if report.dropped_no_predecessor > 0 {
        log::info!(
            "{} rows dropped with no previous round for lagged features",
            report.dropped_no_predecessor
        );
    }
    Ok((RoundDataset::new(rows), report))
}
