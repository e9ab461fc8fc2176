//! Configuration files, iteration logs, field snapshots and run orchestration.

mod config;
mod log;
mod runner;
mod snapshot;

pub use config::{
    parse_config, CaseSpec, OutputSpec, RunManifest, RunSpec, SnapshotFormat, SweepAxes,
};
pub use log::{read_iteration_log, write_iteration_log, LogWriter, LOG_HEADER};
pub use runner::{execute_run, RunSummary};
pub use snapshot::{format_shortest, read_field_snapshot, write_field_snapshot};
