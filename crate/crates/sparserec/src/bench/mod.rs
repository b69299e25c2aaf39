//! Configuration-driven experiment runner and report emission.

pub mod cli;
pub mod config;
pub mod report;
pub mod run;

pub use config::{DatasetSpec, ExperimentConfig, OccDictSpec, PipelineMode};
pub use report::{emit_report, parse_samples_csv, summarize_records, ReportFormat, ALL_FORMATS};
pub use run::{run_experiment, MetricsReport, SampleRecord};
