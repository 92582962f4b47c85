//! Calendar-month and volatility-regime partitions of a dataset.

use std::collections::BTreeMap;

use chrono::DateTime;

use crate::market_data::RoundDataset;

/// `YYYY-MM` of a millisecond timestamp, in UTC.
pub fn month_key(ms: i64) -> String {
    DateTime::from_timestamp_millis(ms)
        .map(|t| t.format("%Y-%m").to_string())
        .unwrap_or_else(|| format!("invalid-{ms}"))
}

/// Partitions rows by the UTC calendar month of their round start.
/// Months are returned in chronological order; empty months do not appear.
pub fn split_monthly(data: &RoundDataset) -> Vec<(String, RoundDataset)> {
    let mut months: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for row in &data.rows {
        months
            .entry(month_key(row.round_start_ms))
            .or_default()
            .push(row.clone());
    }
    months
        .into_iter()
        .map(|(k, rows)| (k, RoundDataset::new(rows)))
        .collect()
}

/// Median of `x1` over all rows; `None` for an empty dataset.
pub fn regime_threshold(data: &RoundDataset) -> Option<f64> {
    let mut x: Vec<f64> = data.rows.iter().map(|r| r.x1).collect();
    if x.is_empty() {
        return None;
    }
    x.sort_by(|a, b| a.total_cmp(b));
    let m = x.len() / 2;
    Some(if x.len() % 2 == 1 {
        x[m]
    } else {
        0.5 * (x[m - 1] + x[m])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSplit {
    pub threshold: f64,
    /// Rows with `x1 <= threshold`.
    pub low: RoundDataset,
    pub high: RoundDataset,
}

/// Splits at a threshold computed elsewhere, e.g. on the pooled sample.
pub fn split_regime_at(data: &RoundDataset, threshold: f64) -> RegimeSplit {
    let (low, high): (Vec<_>, Vec<_>) = data.rows.iter().cloned().partition(|r| r.x1 <= threshold);
    RegimeSplit {
        threshold,
        low: RoundDataset::new(low),
        high: RoundDataset::new(high),
    }
}

/// Splits at the median of `x1` over `data` itself.
pub fn split_regime(data: &RoundDataset) -> RegimeSplit {
    split_regime_at(data, regime_threshold(data).unwrap_or(f64::NAN))
}

/// Significance stars for `p < 0.05`, `0.01`, `0.001`.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}
