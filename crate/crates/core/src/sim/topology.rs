//! Operator DAG with per-component input queues.
//!
//! Each step pushes `arrival_rate * dt` tuples into every source, drains
//! components in topological order up to `parallelism * service_rate * dt`,
//! and forwards `processed * selectivity` to each successor. A component whose
//! queue exceeds the configured threshold is under backpressure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cluster::ClusterSpec;
use super::{SimError, SimMetrics};

pub const DEFAULT_BACKPRESSURE_THRESHOLD: f64 = 1000.0;
pub const DEFAULT_CROSS_VM_LATENCY_MS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: String,
    pub parallelism: u32,
    /// Tuples per second per replica.
    pub service_rate: f64,
    /// Output tuples per processed input tuple.
    pub selectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    components: Vec<ComponentSpec>,
    edges: Vec<(usize, usize)>,
    order: Vec<usize>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    components: Vec<ComponentSpec>,
    edges: Vec<(String, String)>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = SimError;

    fn try_from(raw: RawTopology) -> Result<Self, Self::Error> {
        Topology::new(raw.components, raw.edges)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        let edges = t
            .edges
            .iter()
            .map(|&(a, b)| (t.components[a].id.clone(), t.components[b].id.clone()))
            .collect();
        RawTopology {
            components: t.components,
            edges,
        }
    }
}

impl Topology {
    pub fn new(components: Vec<ComponentSpec>, edges: Vec<(String, String)>) -> Result<Self, SimError> {
        if components.is_empty() {
            return Err(SimError::Structural("topology has no components".into()));
        }
        let mut index = BTreeMap::new();
        for (i, c) in components.iter().enumerate() {
            if c.id.is_empty() {
                return Err(SimError::Structural(format!("component {i} has an empty id")));
            }
            if index.insert(c.id.clone(), i).is_some() {
                return Err(SimError::Structural(format!("duplicate component id {:?}", c.id)));
            }
            if c.parallelism < 1 {
                return Err(SimError::Structural(format!("component {:?} has parallelism 0", c.id)));
            }
            if !(c.service_rate.is_finite() && c.service_rate > 0.0) {
                return Err(SimError::Structural(format!(
                    "component {:?} needs a positive service rate",
                    c.id
                )));
            }
            if !(c.selectivity.is_finite() && c.selectivity > 0.0) {
                return Err(SimError::Structural(format!(
                    "component {:?} needs a positive selectivity",
                    c.id
                )));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| SimError::Structural(format!("edge references unknown component {id:?}")))
        };
        let edges = edges
            .iter()
            .map(|(a, b)| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>, SimError>>()?;
        let order = topological_order(components.len(), &edges)?;
        Ok(Self {
            components,
            edges,
            order,
        })
    }

    /// Linear pipeline `c0 -> c1 -> ...` with uniform service rate and unit selectivity.
    pub fn pipeline(n: usize, parallelism: u32, service_rate: f64) -> Result<Self, SimError> {
        let components = (0..n)
            .map(|i| ComponentSpec {
                id: format!("c{i}"),
                parallelism,
                service_rate,
                selectivity: 1.0,
            })
            .collect();
        let edges = (1..n).map(|i| (format!("c{}", i - 1), format!("c{i}"))).collect();
        Self::new(components, edges)
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    pub fn parallelisms(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.parallelism).collect()
    }

    pub fn total_replicas(&self) -> u32 {
        self.components.iter().map(|c| c.parallelism).sum()
    }

    pub fn set_parallelism(&mut self, component: usize, parallelism: u32) -> Result<(), SimError> {
        if parallelism < 1 {
            return Err(SimError::Capacity("parallelism must stay >= 1".into()));
        }
        let c = self
            .components
            .get_mut(component)
            .ok_or_else(|| SimError::Structural(format!("no component at index {component}")))?;
        c.parallelism = parallelism;
        Ok(())
    }

    fn is_source(&self, i: usize) -> bool {
        !self.edges.iter().any(|&(_, b)| b == i)
    }

    fn is_sink(&self, i: usize) -> bool {
        !self.edges.iter().any(|&(a, _)| a == i)
    }
}

fn topological_order(n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>, SimError> {
    let mut indegree = vec![0usize; n];
    for &(_, b) in edges {
        indegree[b] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &(a, b) in edges {
            if a == i {
                indegree[b] -= 1;
                if indegree[b] == 0 {
                    ready.push(b);
                }
            }
        }
    }
    if order.len() != n {
        return Err(SimError::Structural("topology edges contain a cycle".into()));
    }
    Ok(order)
}

/// VM index of every replica, keyed by component id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Placement {
    replicas: BTreeMap<String, Vec<usize>>,
}

impl Placement {
    pub fn new(replicas: BTreeMap<String, Vec<usize>>) -> Self {
        Self { replicas }
    }

    /// Spread replicas over VMs, filling each VM up to its vCPU count.
    pub fn spread(topology: &Topology, cluster: &ClusterSpec) -> Result<Self, SimError> {
        let mut load = vec![0u32; cluster.len()];
        let mut replicas = BTreeMap::new();
        for c in topology.components() {
            let mut vms = Vec::with_capacity(c.parallelism as usize);
            for _ in 0..c.parallelism {
                let vm = least_loaded(&load, cluster).ok_or_else(|| {
                    SimError::Capacity(format!("no spare vCPU for a replica of {:?}", c.id))
                })?;
                load[vm] += 1;
                vms.push(vm);
            }
            replicas.insert(c.id.clone(), vms);
        }
        Ok(Self { replicas })
    }

    pub fn replicas(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.replicas
    }

    pub fn vms_of(&self, component: &str) -> &[usize] {
        self.replicas.get(component).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn replicas_on(&self, vm: usize) -> usize {
        self.replicas.values().flatten().filter(|&&v| v == vm).count()
    }

    /// Replica count per VM for a cluster of `n_vms`.
    pub fn load(&self, n_vms: usize) -> Vec<u32> {
        let mut load = vec![0u32; n_vms];
        for &vm in self.replicas.values().flatten() {
            if vm < n_vms {
                load[vm] += 1;
            }
        }
        load
    }

    pub fn push_replica(&mut self, component: &str, vm: usize) {
        self.replicas.entry(component.to_string()).or_default().push(vm);
    }

    pub fn pop_replica(&mut self, component: &str) -> Option<usize> {
        self.replicas.get_mut(component).and_then(Vec::pop)
    }

    pub fn move_replica(&mut self, component: &str, replica: usize, vm: usize) -> Result<(), SimError> {
        let slot = self
            .replicas
            .get_mut(component)
            .and_then(|v| v.get_mut(replica))
            .ok_or_else(|| SimError::Structural(format!("no replica {replica} of {component:?}")))?;
        *slot = vm;
        Ok(())
    }

    /// Checks that every replica of every component sits on an existing VM
    /// and that no VM hosts more replicas than it has vCPUs.
    pub fn validate(&self, topology: &Topology, cluster: &ClusterSpec) -> Result<(), SimError> {
        for id in self.replicas.keys() {
            if topology.index_of(id).is_none() {
                return Err(SimError::Structural(format!("placement names unknown component {id:?}")));
            }
        }
        for c in topology.components() {
            let vms = self.vms_of(&c.id);
            if vms.len() != c.parallelism as usize {
                return Err(SimError::Structural(format!(
                    "component {:?} has parallelism {} but {} placed replicas",
                    c.id,
                    c.parallelism,
                    vms.len()
                )));
            }
            if let Some(&bad) = vms.iter().find(|&&vm| vm >= cluster.len()) {
                return Err(SimError::Structural(format!(
                    "replica of {:?} placed on unknown VM {bad}",
                    c.id
                )));
            }
        }
        for (vm, (&n, spec)) in self.load(cluster.len()).iter().zip(&cluster.vms).enumerate() {
            if n > spec.vcpus {
                return Err(SimError::Capacity(format!(
                    "VM {vm} hosts {n} replicas but has {} vCPUs",
                    spec.vcpus
                )));
            }
        }
        Ok(())
    }
}

/// VM with the most spare vCPUs; lowest index on ties.
pub fn least_loaded(load: &[u32], cluster: &ClusterSpec) -> Option<usize> {
    cluster
        .vms
        .iter()
        .zip(load)
        .enumerate()
        .filter(|(_, (spec, &n))| n < spec.vcpus)
        .max_by_key(|(i, (spec, &n))| (spec.vcpus - n, std::cmp::Reverse(*i)))
        .map(|(i, _)| i)
}

/// Per-component tuple accounting for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlowRecord {
    pub inflow: f64,
    pub processed: f64,
    pub outflow: f64,
    pub queue_before: f64,
    pub queue_after: f64,
}

/// Queue state carried between topology steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySim {
    pub backpressure_threshold: f64,
    pub cross_vm_latency_ms: f64,
    queues: Vec<f64>,
    last_flows: Vec<FlowRecord>,
}

impl TopologySim {
    pub fn new(n_components: usize) -> Self {
        Self {
            backpressure_threshold: DEFAULT_BACKPRESSURE_THRESHOLD,
            cross_vm_latency_ms: DEFAULT_CROSS_VM_LATENCY_MS,
            queues: vec![0.0; n_components],
            last_flows: Vec::new(),
        }
    }

    pub fn queues(&self) -> &[f64] {
        &self.queues
    }

    pub fn last_flows(&self) -> &[FlowRecord] {
        &self.last_flows
    }

    /// Match queue slots to a topology whose component count changed.
    pub fn resize(&mut self, n_components: usize) {
        self.queues.resize(n_components, 0.0);
    }

    pub fn step(
        &mut self,
        topology: &Topology,
        placement: &Placement,
        cluster: &ClusterSpec,
        arrival_rate: f64,
        dt: f64,
    ) -> Result<SimMetrics, SimError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::Structural(format!("dt must be positive, got {dt}")));
        }
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(SimError::Structural(format!(
                "arrival rate must be >= 0, got {arrival_rate}"
            )));
        }
        placement.validate(topology, cluster)?;
        self.resize(topology.len());

        let comps = topology.components();
        let n = comps.len();
        let mut inflow = vec![0.0; n];
        for (i, v) in inflow.iter_mut().enumerate() {
            if topology.is_source(i) {
                *v = arrival_rate * dt;
            }
        }
        let mut flows = vec![FlowRecord::default(); n];
        for &i in topology.order() {
            let c = &comps[i];
            let capacity = f64::from(c.parallelism) * c.service_rate * dt;
            let queue_before = self.queues[i];
            let available = queue_before + inflow[i];
            let processed = available.min(capacity);
            let queue_after = available - processed;
            let outflow = processed * c.selectivity;
            for &(a, b) in topology.edges() {
                if a == i {
                    inflow[b] += outflow;
                }
            }
            self.queues[i] = queue_after;
            flows[i] = FlowRecord {
                inflow: inflow[i],
                processed,
                outflow,
                queue_before,
                queue_after,
            };
        }

        // longest path of (queue wait + service + cross-VM hops)
        let mut path_ms = vec![0.0f64; n];
        for &i in topology.order() {
            let c = &comps[i];
            let own = 1000.0 / c.service_rate
                + 1000.0 * self.queues[i] / (f64::from(c.parallelism) * c.service_rate);
            let upstream = topology
                .edges()
                .iter()
                .filter(|&&(_, b)| b == i)
                .map(|&(a, _)| path_ms[a] + self.cross_vm_penalty(placement, &comps[a].id, &c.id))
                .fold(0.0, f64::max);
            path_ms[i] = upstream + own;
        }
        let latency_ms = (0..n)
            .filter(|&i| topology.is_sink(i))
            .map(|i| path_ms[i])
            .fold(0.0, f64::max);

        let sink_processed: f64 = (0..n)
            .filter(|&i| topology.is_sink(i))
            .map(|i| flows[i].processed)
            .sum();
        let busy: f64 = comps
            .iter()
            .zip(&flows)
            .map(|(c, f)| f.processed / c.service_rate)
            .sum();
        let slots: f64 = comps.iter().map(|c| f64::from(c.parallelism) * dt).sum();
        let queued: f64 = self.queues.iter().sum();
        let backpressure = self.queues.iter().any(|&q| q > self.backpressure_threshold);

        self.last_flows = flows;
        Ok(SimMetrics {
            processing_time_ms: latency_ms,
            throughput_tps: sink_processed / dt,
            latency_ms,
            queue_lengths: self.queues.clone(),
            backpressure,
            cpu_util_pct: (100.0 * busy / slots).clamp(0.0, 100.0),
            mem_util_pct: (100.0 * queued / (self.backpressure_threshold * n as f64)).clamp(0.0, 100.0),
            infra_cost_rate: cluster.hourly_cost(),
            contention: 1.0,
        })
    }

    /// Per-tuple penalty weighted by the fraction of replica pairs split across VMs.
    fn cross_vm_penalty(&self, placement: &Placement, from: &str, to: &str) -> f64 {
        let a = placement.vms_of(from);
        let b = placement.vms_of(to);
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        let split = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| (x, y)))
            .filter(|(x, y)| x != y)
            .count();
        self.cross_vm_latency_ms * split as f64 / (a.len() * b.len()) as f64
    }
}
