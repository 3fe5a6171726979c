//! Run configuration, the `TESB` trace format, reports and plot tables.

mod config;
mod report;
mod trace_file;

pub use config::{parse_grid, sha256_hex, RunConfig};
pub use report::{
    analysis_plot_tables, envelope_table, envelope_table_si, prediction, AnalysisReport,
    CalibrationReport, ClosureReport, MeasuredPoint, Prediction, Quantity, Report,
    ReportProvenance, Table,
};
pub use trace_file::{load_batch, read_batch, save_batch, write_batch, MAGIC, VERSION};
