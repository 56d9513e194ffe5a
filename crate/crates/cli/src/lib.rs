//! Operator commands for the stream-processing tuner: train, evaluate,
//! compare, oracle and report. The binary is a thin clap front end.

pub mod compare;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod oracle;
pub mod report;
pub mod runtime;
pub mod stats;
pub mod train;

pub use compare::{cmd_compare, CompareReport, CompareRow, EvalPolicy};
pub use config::RunConfig;
pub use error::CliError;
pub use evaluate::{cmd_evaluate, EvaluateSummary};
pub use oracle::{cmd_oracle, OracleRow};
pub use report::{cmd_report, Report};
pub use train::{cmd_train, TrainSummary};
