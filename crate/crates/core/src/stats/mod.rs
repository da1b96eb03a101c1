//! Cross-method analysis over the bundled results table: per-metric
//! rankings, Spearman correlation of efficiency metrics with runtime, and
//! combined reports.

mod fixture;
mod report;
mod srocc;

pub use fixture::{FixtureTable, Metric, MetricsRow, RowGroup, SubsetRule};
pub use report::{emit_report, parse_report_csv, report_rows, rows_to_csv, ReportRow};
pub use srocc::{
    correlations_for, rank_metric, ranks, runtime_correlations, search_subsets, srocc, CorrelationTable, RankedEntry,
    TieRule, PUBLISHED_SROCC,
};
