//! Metrics manager, configuration manager and the JSON-lines event log.

pub mod log;
pub mod metrics;
pub mod snapshot;

use std::path::Path;

use thiserror::Error;

pub use self::log::{
    append_log, parse_log, read_log, EventLog, EventLogRecord, EventLogWriter, LogHeader,
    LOG_SCHEMA_VERSION,
};
pub use metrics::{Aggregation, MetricSample, MetricStore};
pub use snapshot::ConfigSnapshot;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("metric {name}: timestamp {got} precedes last recorded {last}")]
    Ordering { name: String, last: u64, got: u64 },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("encode failed: {0}")]
    Encode(String),
    #[error("{path}: {source}")]
    Path {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TelemetryError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TelemetryError::Path {
            path: path.display().to_string(),
            source,
        }
    }
}
