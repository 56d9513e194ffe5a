//! Building simulator objects from a run configuration.

use sspe_core::env::StreamEnv;
use sspe_core::madrl::{AgentSpec, World};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn build_env(cfg: &RunConfig) -> Result<StreamEnv, CliError> {
    Ok(StreamEnv::new(
        cfg.env.clone(),
        cfg.workload.clone(),
        cfg.sim.cost_model.clone(),
        cfg.sim.cluster.clone(),
        cfg.seed,
    )?)
}

pub fn build_world(cfg: &RunConfig) -> Result<World, CliError> {
    let topology = cfg
        .sim
        .topology
        .clone()
        .map(|t| (t, cfg.sim.placement.clone()));
    Ok(World::new(build_env(cfg)?, topology)?)
}

pub fn agent_specs(cfg: &RunConfig, world: &World) -> Vec<AgentSpec> {
    cfg.agents
        .iter()
        .flatten()
        .map(|a| AgentSpec {
            role: a.role,
            state_partition: a
                .state_partition
                .clone()
                .unwrap_or_else(|| world.default_partition(a.role)),
        })
        .collect()
}
