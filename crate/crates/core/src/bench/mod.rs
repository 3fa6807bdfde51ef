//! Task ingestion, generation metrics and TP/TN/GM/Drop reporting.

pub mod metrics;
mod report;
mod tasks;

pub use metrics::{edit_sim, f1, rouge_l};
pub use report::{
    category_correlation, drop, evaluate, pearson, table_csv, DetectionSummary, EvalConfig, EvalReport, Exclusion,
    NegativeSource, RecordOutcome, ReportMetadata, SummaryRow, TaskCorrelation, TaskRow,
};
pub use tasks::{load_tasks, parse_tasks, Category, Metric, TaskRecord};
