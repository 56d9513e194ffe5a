use std::path::Path;

use sspe_core::dqn::DqnError;
use sspe_core::env::EnvError;
use sspe_core::madrl::MadrlError;
use sspe_core::sim::SimError;
use sspe_core::telemetry::TelemetryError;
use thiserror::Error;

/// A `(field path, message)` pair.
pub type Violation = (String, String);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("no data: {0}")]
    NoData(String),
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Madrl(#[from] MadrlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 for configuration errors, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            _ => 2,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|(field, msg)| format!("  {field}: {msg}"))
        .collect::<Vec<_>>()
        .join("\n")
}
