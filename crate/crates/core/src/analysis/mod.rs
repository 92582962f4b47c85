//! Subsample partitions, report tables and the end-to-end pipeline.

pub mod pipeline;
pub mod report;
pub mod subsample;

pub use pipeline::{run_pipeline, Failure, InputMode, PipelineError, PipelineSummary, RunConfig};
pub use report::{
    render_table, short_bidder, subsample_csv, subsample_latex, BidderPanel, RenderedTable,
    ReportTable, SubsampleRow,
};
pub use subsample::{
    month_key, regime_threshold, split_monthly, split_regime, split_regime_at, stars, RegimeSplit,
};
