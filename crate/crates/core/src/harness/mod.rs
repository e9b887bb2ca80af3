//! Scenario files, the simulation driver, KPI metrics and report output.

mod io;
mod metrics;
mod report;
mod sim;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use io::{emit_scenario, parse_scenario, parse_scenario_str, parse_scenario_with, write_scenario, ParseError, Parsed, Strictness};
pub use metrics::{
    deadline_reliability, drop_code, latency_percentile, percentile_sorted, MetricTrace, MetricsError, Observation,
    ObservationKind, UNSLICED,
};
pub use report::{
    evaluate_thresholds, rerender, summary_csv, write_artifacts, write_summary_csv, ActuatorReport, CellReport,
    DeviceReport, GatewayReport, KpiReport, LatencyStats, PlcReport, SliceReport, SyncReport, ThresholdResult,
    EVENT_LOG_FILE, REPORT_FILE, SUMMARY_FILE,
};
pub use sim::{run, run_with, RunOptions, RunOutput, PACKET_HEADER_BYTES};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid scenario: {0}")]
    Scenario(#[from] crate::workloads::ScenarioError),
    #[error("slice admission: {0}")]
    Corenet(#[from] crate::corenet::CorenetError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot emit scenario: {0}")]
    Emit(String),
    #[error("{0}")]
    Run(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}
