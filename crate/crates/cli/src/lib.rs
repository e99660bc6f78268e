//! Pipeline orchestration and report rendering behind the `sevlogit` binary.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{Overrides, RunConfig};
pub use pipeline::{run_pipeline, RunSummary, StageError};
pub use report::{render_comparison, render_estimation_table, ComparisonMatrix, ReportDocument};
