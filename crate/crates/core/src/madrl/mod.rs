//! Multi-agent decomposition: five specialised roles over one simulated
//! world, acting in a fixed round-robin order and sharing one reward.

pub mod coordinator;
pub mod world;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coordinator::{heuristic_action, replay_actions, Coordinator, MadrlAgent, MadrlConfig, Policy, RoundOutcome};
pub use world::{cross_vm_latency_ms, EnactmentResult, TopologyState, TunerParam, World, WorldStep, TUNER_PARAMS};

use crate::dqn::DqnError;
use crate::env::{compute_reward, slo_satisfied, EnvError, Observation, RewardSpec, SloSpec};
use crate::sim::{SimError, SimMetrics};

/// Penalty subtracted from the shared reward when the SLO is missed.
pub const DEFAULT_SLO_PENALTY: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MadrlError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("replay diverged at record {index}: {message}")]
    Replay { index: usize, message: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    ClusterAutoscaler,
    ParallelismAutoscaler,
    Scheduler,
    ResourceAllocator,
    SystemParameterTuner,
}

impl AgentRole {
    pub const ALL: [AgentRole; 5] = [
        AgentRole::ClusterAutoscaler,
        AgentRole::ParallelismAutoscaler,
        AgentRole::Scheduler,
        AgentRole::ResourceAllocator,
        AgentRole::SystemParameterTuner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::ClusterAutoscaler => "cluster_autoscaler",
            AgentRole::ParallelismAutoscaler => "parallelism_autoscaler",
            AgentRole::Scheduler => "scheduler",
            AgentRole::ResourceAllocator => "resource_allocator",
            AgentRole::SystemParameterTuner => "system_parameter_tuner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// Roles that act on the operator topology.
    pub fn needs_topology(self) -> bool {
        matches!(self, AgentRole::ParallelismAutoscaler | AgentRole::Scheduler)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A role plus the indices of the global observation it sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub role: AgentRole,
    pub state_partition: Vec<usize>,
}

impl AgentSpec {
    pub fn validate(&self, global_dim: usize) -> Result<(), MadrlError> {
        if self.state_partition.is_empty() {
            return Err(MadrlError::Structural(format!("{}: empty state partition", self.role)));
        }
        if let Some(&bad) = self.state_partition.iter().find(|&&i| i >= global_dim) {
            return Err(MadrlError::Structural(format!(
                "{}: partition index {bad} outside a {global_dim}-feature observation",
                self.role
            )));
        }
        Ok(())
    }
}

/// Project the global observation onto `partition`, keeping its order.
pub fn partition_state(global: &Observation, partition: &[usize]) -> Result<Observation, MadrlError> {
    partition
        .iter()
        .map(|&i| {
            global.0.get(i).copied().ok_or_else(|| {
                MadrlError::Structural(format!(
                    "partition index {i} outside a {}-feature observation",
                    global.len()
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Observation)
}

/// `alpha / (1000 t) - beta * cost_rate_norm - penalty` when the SLO is missed.
pub fn shared_reward(
    metrics: &SimMetrics,
    effective_time_ms: f64,
    cost_rate_norm: f64,
    spec: &RewardSpec,
    slo: &SloSpec,
    slo_penalty: f64,
) -> Result<f64, MadrlError> {
    let base = compute_reward(effective_time_ms, cost_rate_norm, spec)?;
    Ok(if slo_satisfied(metrics, slo) {
        base
    } else {
        base - slo_penalty
    })
}
