//! The simulated world the agents act on, and the enactors that change it.

use std::collections::BTreeMap;

use super::{AgentRole, MadrlError};
use crate::env::{Observation, StepOutcome, StreamEnv, OBS_DIM};
use crate::sim::cost::executor_cost_rate;
use crate::sim::topology::least_loaded;
use crate::sim::{
    scale_cluster, ClusterSpec, ExecutorConfig, Placement, ReconfigDelays, SimMetrics, Topology,
    TopologySim, VmSpec,
};
use crate::telemetry::ConfigSnapshot;

pub struct TunerParam {
    pub name: &'static str,
    pub grid: &'static [f64],
    pub default_index: usize,
}

pub const TUNER_PARAMS: [TunerParam; 3] = [
    TunerParam {
        name: "queue_capacity",
        grid: &[500.0, 1000.0, 2000.0, 4000.0],
        default_index: 1,
    },
    TunerParam {
        name: "socket_buffer_kb",
        grid: &[64.0, 128.0, 256.0, 512.0],
        default_index: 1,
    },
    TunerParam {
        name: "packet_size_bytes",
        grid: &[512.0, 1024.0, 1500.0, 9000.0],
        default_index: 2,
    },
];

/// Cross-VM hop cost at the default socket buffer and packet size.
pub const BASE_CROSS_VM_LATENCY_MS: f64 = 2.0;
/// Parallelism that maps to 1.0 in the observation.
pub const OBS_PARALLELISM_SCALE: f64 = 16.0;

/// Hop latency shrinks with larger socket buffers and packets.
pub fn cross_vm_latency_ms(socket_buffer_kb: f64, packet_size_bytes: f64) -> f64 {
    BASE_CROSS_VM_LATENCY_MS * (128.0 / socket_buffer_kb).sqrt() * (1500.0 / packet_size_bytes).powf(0.25)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnactmentResult {
    pub applied: bool,
    /// Raw simulated delay; the world amortizes it into the next batch.
    pub reconfiguration_delay_ms: f64,
    /// Change in hourly infrastructure cost.
    pub cost_delta: f64,
}

impl EnactmentResult {
    fn noop() -> Self {
        Self {
            applied: true,
            reconfiguration_delay_ms: 0.0,
            cost_delta: 0.0,
        }
    }

    fn rejected() -> Self {
        Self {
            applied: false,
            ..Self::noop()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TopologyState {
    pub topology: Topology,
    pub placement: Placement,
    pub sim: TopologySim,
}

/// Batch outcome of a round plus the topology step, if any.
#[derive(Debug, Clone)]
pub struct WorldStep {
    pub outcome: StepOutcome,
    pub topology_metrics: Option<SimMetrics>,
    /// Batch metrics with topology latency added and topology throughput
    /// substituted; the SLO is judged on these.
    pub metrics: SimMetrics,
}

pub struct World {
    env: StreamEnv,
    initial_cluster: ClusterSpec,
    initial_topology: Option<(Topology, Placement)>,
    vm_template: VmSpec,
    max_vms: u32,
    delays: ReconfigDelays,
    topology: Option<TopologyState>,
    tuner: [usize; 3],
    config: ExecutorConfig,
    pending_delay_ms: f64,
}

impl World {
    pub fn new(env: StreamEnv, topology: Option<(Topology, Option<Placement>)>) -> Result<Self, MadrlError> {
        let cluster = env.cluster().clone();
        let max_vms = env.config().max_vms;
        if cluster.len() > max_vms as usize {
            return Err(MadrlError::Structural(format!(
                "cluster starts with {} VMs but max_vms is {max_vms}",
                cluster.len()
            )));
        }
        let initial_topology = match topology {
            None => None,
            Some((t, p)) => {
                let p = match p {
                    Some(p) => p,
                    None => Placement::spread(&t, &cluster)?,
                };
                p.validate(&t, &cluster)?;
                Some((t, p))
            }
        };
        let mut world = Self {
            vm_template: cluster.vms[0].clone(),
            delays: env.config().delays,
            config: env.executor_config(),
            env,
            initial_cluster: cluster,
            initial_topology,
            max_vms,
            topology: None,
            tuner: TUNER_PARAMS.map(|p| p.default_index),
            pending_delay_ms: 0.0,
        };
        world.reset_structure();
        Ok(world)
    }

    /// Restore cluster, topology, placement, tuner and executor config to their initial values.
    pub fn reset_structure(&mut self) {
        self.env.set_cluster(self.initial_cluster.clone());
        self.topology = self.initial_topology.as_ref().map(|(t, p)| TopologyState {
            topology: t.clone(),
            placement: p.clone(),
            sim: TopologySim::new(t.len()),
        });
        self.tuner = TUNER_PARAMS.map(|p| p.default_index);
        self.apply_tuner();
        self.config = self.env.config().initial_config;
        self.pending_delay_ms = 0.0;
    }

    pub fn reset(&mut self, fps: Option<u32>) -> Result<Observation, MadrlError> {
        self.reset_structure();
        self.env.reset(fps)?;
        self.config = self.env.executor_config();
        Ok(self.observe())
    }

    pub fn env(&self) -> &StreamEnv {
        &self.env
    }

    pub fn cluster(&self) -> &ClusterSpec {
        self.env.cluster()
    }

    pub fn topology(&self) -> Option<&TopologyState> {
        self.topology.as_ref()
    }

    pub fn executor_config(&self) -> ExecutorConfig {
        self.config
    }

    pub fn max_vms(&self) -> u32 {
        self.max_vms
    }

    pub fn tuner_values(&self) -> BTreeMap<String, f64> {
        TUNER_PARAMS
            .iter()
            .zip(self.tuner)
            .map(|(p, i)| (p.name.to_string(), p.grid[i]))
            .collect()
    }

    fn n_components(&self) -> usize {
        self.topology.as_ref().map_or(0, |t| t.topology.len())
    }

    /// Layout: the 9 single-agent features (with pending executor config),
    /// vCPU share, VM share, per-component parallelism, per-component queue
    /// fill, then one entry per tuner parameter.
    pub fn global_dim(&self) -> usize {
        OBS_DIM + 2 + 2 * self.n_components() + TUNER_PARAMS.len()
    }

    pub fn observe(&self) -> Observation {
        let mut obs = self.env.observe_with(&self.config).0;
        let cluster = self.env.cluster();
        let max_vcpus = f64::from(self.max_vms) * f64::from(self.vm_template.vcpus);
        obs.push((f64::from(cluster.total_vcpus()) / max_vcpus).min(1.0));
        obs.push(cluster.len() as f64 / f64::from(self.max_vms));
        if let Some(t) = &self.topology {
            for c in t.topology.components() {
                obs.push((f64::from(c.parallelism) / OBS_PARALLELISM_SCALE).min(1.0));
            }
            for &q in t.sim.queues() {
                obs.push((q / t.sim.backpressure_threshold).min(1.0));
            }
        }
        for (p, &i) in TUNER_PARAMS.iter().zip(&self.tuner) {
            obs.push(i as f64 / (p.grid.len() - 1) as f64);
        }
        Observation(obs)
    }

    pub fn default_partition(&self, role: AgentRole) -> Vec<usize> {
        let n = self.n_components();
        let par = OBS_DIM + 2..OBS_DIM + 2 + n;
        let queues = OBS_DIM + 2 + n..OBS_DIM + 2 + 2 * n;
        let tuner = OBS_DIM + 2 + 2 * n..self.global_dim();
        match role {
            AgentRole::ResourceAllocator => (0..OBS_DIM).collect(),
            AgentRole::ClusterAutoscaler => vec![0, 4, 5, 7, 8, OBS_DIM, OBS_DIM + 1],
            AgentRole::ParallelismAutoscaler => [0, 4, 7].into_iter().chain(par).chain(queues).collect(),
            AgentRole::Scheduler => [4, OBS_DIM + 1].into_iter().chain(par).chain(queues).collect(),
            AgentRole::SystemParameterTuner => [4, 7].into_iter().chain(queues).chain(tuner).collect(),
        }
    }

    pub fn supports(&self, role: AgentRole) -> bool {
        !role.needs_topology() || self.topology.is_some()
    }

    pub fn action_count(&self, role: AgentRole) -> usize {
        match role {
            AgentRole::ClusterAutoscaler => 3,
            AgentRole::ParallelismAutoscaler => 3usize.pow(self.n_components() as u32),
            AgentRole::Scheduler => 1 + self.n_components() * self.max_vms as usize,
            AgentRole::ResourceAllocator => self.env.n_actions(),
            AgentRole::SystemParameterTuner => 1 + 2 * TUNER_PARAMS.len(),
        }
    }

    pub fn noop_action(&self, role: AgentRole) -> usize {
        match role {
            AgentRole::ClusterAutoscaler => 1,
            AgentRole::ParallelismAutoscaler => (self.action_count(role) - 1) / 2,
            AgentRole::Scheduler | AgentRole::SystemParameterTuner => 0,
            AgentRole::ResourceAllocator => self
                .env
                .codec()
                .noop()
                .unwrap_or_else(|| crate::env::ActionCodec::encode_config(&self.config)),
        }
    }

    /// Apply one agent's action. Infeasible actions leave the world untouched
    /// and come back with `applied = false`.
    pub fn enact(&mut self, role: AgentRole, action: usize) -> Result<EnactmentResult, MadrlError> {
        if !self.supports(role) {
            return Err(MadrlError::Structural(format!("{role} needs a topology")));
        }
        let n = self.action_count(role);
        if action >= n {
            return Err(MadrlError::Structural(format!(
                "{role}: action {action} outside [0, {n})"
            )));
        }
        let result = match role {
            AgentRole::ClusterAutoscaler => self.enact_vm(action as i32 - 1)?,
            AgentRole::ParallelismAutoscaler => self.enact_parallelism(action)?,
            AgentRole::Scheduler => self.enact_move(action)?,
            AgentRole::ResourceAllocator => return self.enact_config(action),
            AgentRole::SystemParameterTuner => self.enact_parameter(action),
        };
        if result.applied {
            self.pending_delay_ms += result.reconfiguration_delay_ms;
        }
        Ok(result)
    }

    fn enact_vm(&mut self, delta: i32) -> Result<EnactmentResult, MadrlError> {
        let cluster = self.env.cluster().clone();
        match delta {
            0 => Ok(EnactmentResult::noop()),
            1 => {
                if cluster.len() >= self.max_vms as usize {
                    return Ok(EnactmentResult::rejected());
                }
                let out = scale_cluster(&cluster, 1, &self.vm_template, None)?;
                self.env.set_cluster(out.cluster);
                Ok(EnactmentResult {
                    applied: true,
                    reconfiguration_delay_ms: self.delays.vm_change_ms,
                    cost_delta: self.vm_template.hourly_cost,
                })
            }
            _ => {
                if cluster.len() <= 1 {
                    return Ok(EnactmentResult::rejected());
                }
                let last = cluster.len() - 1;
                let mut moves = 0usize;
                let mut placement = None;
                if let Some(t) = &self.topology {
                    let mut p = t.placement.clone();
                    let kept = ClusterSpec {
                        vms: cluster.vms[..last].to_vec(),
                    };
                    for c in t.topology.components() {
                        for r in 0..p.vms_of(&c.id).len() {
                            if p.vms_of(&c.id)[r] != last {
                                continue;
                            }
                            let Some(vm) = least_loaded(&p.load(last), &kept) else {
                                return Ok(EnactmentResult::rejected());
                            };
                            p.move_replica(&c.id, r, vm)?;
                            moves += 1;
                        }
                    }
                    placement = Some(p);
                }
                let out = scale_cluster(&cluster, -1, &self.vm_template, placement.as_ref())?;
                let removed_cost = cluster.vms[last].hourly_cost;
                self.env.set_cluster(out.cluster);
                if let (Some(t), Some(p)) = (self.topology.as_mut(), placement) {
                    t.placement = p;
                }
                Ok(EnactmentResult {
                    applied: true,
                    reconfiguration_delay_ms: self.delays.vm_change_ms
                        + moves as f64 * self.delays.replica_move_ms,
                    cost_delta: -removed_cost,
                })
            }
        }
    }

    fn enact_parallelism(&mut self, action: usize) -> Result<EnactmentResult, MadrlError> {
        let cluster = self.env.cluster().clone();
        let t = self.topology.as_mut().expect("checked by supports");
        let n = t.topology.len();
        let mut steps = vec![0i32; n];
        let mut rest = action;
        for s in steps.iter_mut().rev() {
            *s = (rest % 3) as i32 - 1;
            rest /= 3;
        }
        let mut topology = t.topology.clone();
        let mut placement = t.placement.clone();
        let mut changed = 0usize;
        for (i, &step) in steps.iter().enumerate() {
            let id = topology.components()[i].id.clone();
            let par = topology.components()[i].parallelism;
            match step {
                -1 => {
                    if par <= 1 {
                        return Ok(EnactmentResult::rejected());
                    }
                    placement.pop_replica(&id);
                    topology.set_parallelism(i, par - 1)?;
                }
                1 => {
                    let Some(vm) = least_loaded(&placement.load(cluster.len()), &cluster) else {
                        return Ok(EnactmentResult::rejected());
                    };
                    placement.push_replica(&id, vm);
                    topology.set_parallelism(i, par + 1)?;
                }
                _ => continue,
            }
            changed += 1;
        }
        placement.validate(&topology, &cluster)?;
        t.topology = topology;
        t.placement = placement;
        Ok(EnactmentResult {
            applied: true,
            reconfiguration_delay_ms: changed as f64 * self.delays.parallelism_change_ms,
            cost_delta: 0.0,
        })
    }

    fn enact_move(&mut self, action: usize) -> Result<EnactmentResult, MadrlError> {
        if action == 0 {
            return Ok(EnactmentResult::noop());
        }
        let cluster = self.env.cluster().clone();
        let max_vms = self.max_vms as usize;
        let t = self.topology.as_mut().expect("checked by supports");
        let (component, vm) = ((action - 1) / max_vms, (action - 1) % max_vms);
        if vm >= cluster.len() {
            return Ok(EnactmentResult::rejected());
        }
        if t.placement.load(cluster.len())[vm] >= cluster.vms[vm].vcpus {
            return Ok(EnactmentResult::rejected());
        }
        let id = t.topology.components()[component].id.clone();
        let Some(replica) = t.placement.vms_of(&id).iter().rposition(|&v| v != vm) else {
            return Ok(EnactmentResult::rejected());
        };
        t.placement.move_replica(&id, replica, vm)?;
        Ok(EnactmentResult {
            applied: true,
            reconfiguration_delay_ms: self.delays.replica_move_ms,
            cost_delta: 0.0,
        })
    }

    fn enact_parameter(&mut self, action: usize) -> EnactmentResult {
        if action == 0 {
            return EnactmentResult::noop();
        }
        let (p, up) = ((action - 1) / 2, (action - 1) % 2 == 1);
        let idx = self.tuner[p];
        let next = if up {
            if idx + 1 >= TUNER_PARAMS[p].grid.len() {
                return EnactmentResult::rejected();
            }
            idx + 1
        } else {
            if idx == 0 {
                return EnactmentResult::rejected();
            }
            idx - 1
        };
        self.tuner[p] = next;
        self.apply_tuner();
        EnactmentResult {
            applied: true,
            reconfiguration_delay_ms: self.delays.parameter_change_ms,
            cost_delta: 0.0,
        }
    }

    /// The executor change is charged by the environment when the batch runs,
    /// so it is not added to the pending delay here.
    fn enact_config(&mut self, action: usize) -> Result<EnactmentResult, MadrlError> {
        let next = self.env.codec().decode(action, &self.config)?;
        let changed = next != self.config;
        let cost_delta = executor_cost_rate(&next) - executor_cost_rate(&self.config);
        self.config = next;
        Ok(EnactmentResult {
            applied: true,
            reconfiguration_delay_ms: if changed { self.delays.config_delta_ms } else { 0.0 },
            cost_delta,
        })
    }

    fn apply_tuner(&mut self) {
        let v = self.tuner_values();
        if let Some(t) = self.topology.as_mut() {
            t.sim.backpressure_threshold = v["queue_capacity"];
            t.sim.cross_vm_latency_ms = cross_vm_latency_ms(v["socket_buffer_kb"], v["packet_size_bytes"]);
        }
    }

    /// Run the batch for this round with everything enacted so far.
    ///
    /// `action` is what the step record reports as the executor action.
    pub fn finish_round(&mut self, action: usize, seed: u64) -> Result<WorldStep, MadrlError> {
        let extra = self.pending_delay_ms * self.delays.amortization;
        self.pending_delay_ms = 0.0;
        let mut outcome = self.env.advance(self.config, action, extra, seed)?;
        let mut metrics = outcome.metrics.clone();
        let mut topology_metrics = None;
        if let Some(t) = self.topology.as_mut() {
            let arrival = f64::from(self.env.workload().fps());
            let m = t.sim.step(&t.topology, &t.placement, self.env.cluster(), arrival, 1.0)?;
            outcome.effective_time_ms += m.latency_ms;
            outcome.record.processing_time_ms = outcome.effective_time_ms;
            metrics.latency_ms += m.latency_ms;
            metrics.throughput_tps = m.throughput_tps;
            metrics.backpressure |= m.backpressure;
            metrics.queue_lengths = m.queue_lengths.clone();
            topology_metrics = Some(m);
        }
        Ok(WorldStep {
            outcome,
            topology_metrics,
            metrics,
        })
    }

    pub fn next_batch_seed(&mut self) -> u64 {
        self.env.next_batch_seed()
    }

    /// Drop delay accumulated by enactments without running a batch.
    pub fn discard_pending(&mut self) {
        self.pending_delay_ms = 0.0;
    }

    pub fn snapshot(&self, taken_at: u64) -> ConfigSnapshot {
        ConfigSnapshot::capture(
            taken_at,
            &self.config,
            self.topology.as_ref().map(|t| &t.topology),
            self.topology.as_ref().map(|t| &t.placement),
            self.env.cluster(),
            &self.tuner_values(),
        )
    }
}
