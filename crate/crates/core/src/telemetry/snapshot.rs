use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::{ClusterSpec, ExecutorConfig, Placement, Topology};

/// Deep copy of the tunable world state at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub executor: ExecutorConfig,
    /// (component id, parallelism) in topology order.
    pub parallelisms: Vec<(String, u32)>,
    pub placement: Placement,
    pub cluster: ClusterSpec,
    pub tuner: BTreeMap<String, f64>,
    pub taken_at: u64,
}

impl ConfigSnapshot {
    pub fn capture(
        taken_at: u64,
        executor: &ExecutorConfig,
        topology: Option<&Topology>,
        placement: Option<&Placement>,
        cluster: &ClusterSpec,
        tuner: &BTreeMap<String, f64>,
    ) -> Self {
        Self {
            executor: *executor,
            parallelisms: topology
                .map(|t| {
                    t.components()
                        .iter()
                        .map(|c| (c.id.clone(), c.parallelism))
                        .collect()
                })
                .unwrap_or_default(),
            placement: placement.cloned().unwrap_or_default(),
            cluster: cluster.clone(),
            tuner: tuner.clone(),
            taken_at,
        }
    }
}
