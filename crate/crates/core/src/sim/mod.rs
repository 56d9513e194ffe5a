//! Seedable model of the cluster, the executor cost surface and the operator topology.
//!
//! Nothing here holds global state; each simulator value is independent and `Send`.

pub mod cluster;
pub mod combinatorics;
pub mod cost;
pub mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{scale_cluster, ClusterSpec, ReconfigDelays, ScaleOutcome, VmSpec};
pub use combinatorics::{action_space_size, count_parallelism_configs};
pub use cost::{
    brute_force_optimum, expected_processing_time_ms, mem_factor, simulate_batch, CostModelParams,
    ExecutorConfig, WorkloadSpec,
};
pub use topology::{ComponentSpec, Placement, Topology, TopologySim};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{field} = {value} outside [{min}, {max}]")]
    OutOfBounds {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{field} = {value} is not a multiple of {step}")]
    NotOnGrid {
        field: &'static str,
        value: u32,
        step: u32,
    },
    #[error("invalid cost model {field}: {message}")]
    InvalidParams { field: &'static str, message: String },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("{0} overflows u128")]
    Overflow(&'static str),
}

/// Observable outcome of one simulated batch or topology step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub processing_time_ms: f64,
    pub throughput_tps: f64,
    pub latency_ms: f64,
    pub queue_lengths: Vec<f64>,
    pub backpressure: bool,
    pub cpu_util_pct: f64,
    pub mem_util_pct: f64,
    /// Currency units per hour.
    pub infra_cost_rate: f64,
    /// Over-provisioning slowdown factor (1 when within the core budget).
    pub contention: f64,
}
