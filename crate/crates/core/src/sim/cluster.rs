use serde::{Deserialize, Serialize};

use super::topology::Placement;
use super::SimError;

/// Simulated provisioning time for one VM.
pub const VM_PROVISION_DELAY_MS: f64 = 30_000.0;

/// Simulated cost of each kind of reconfiguration, in ms.
///
/// `amortization` is the fraction of a delay charged to the batch that
/// follows the change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconfigDelays {
    pub vm_change_ms: f64,
    pub parallelism_change_ms: f64,
    pub replica_move_ms: f64,
    pub config_delta_ms: f64,
    pub parameter_change_ms: f64,
    pub amortization: f64,
}

impl Default for ReconfigDelays {
    fn default() -> Self {
        Self {
            vm_change_ms: VM_PROVISION_DELAY_MS,
            parallelism_change_ms: 5_000.0,
            replica_move_ms: 2_000.0,
            config_delta_ms: 1_000.0,
            parameter_change_ms: 500.0,
            amortization: 0.01,
        }
    }
}

impl ReconfigDelays {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (name, v) in [
            ("vm_change_ms", self.vm_change_ms),
            ("parallelism_change_ms", self.parallelism_change_ms),
            ("replica_move_ms", self.replica_move_ms),
            ("config_delta_ms", self.config_delta_ms),
            ("parameter_change_ms", self.parameter_change_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push((name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.amortization.is_finite() && (0.0..=1.0).contains(&self.amortization)) {
            out.push(("amortization", format!("must be in [0, 1], got {}", self.amortization)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmSpec {
    pub vcpus: u32,
    pub ram_mb: u32,
    pub hourly_cost: f64,
}

impl Default for VmSpec {
    /// 4 vCPU / 8 GB worker.
    fn default() -> Self {
        Self {
            vcpus: 4,
            ram_mb: 8192,
            hourly_cost: 0.192,
        }
    }
}

impl VmSpec {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.vcpus < 1 {
            out.push(("vcpus", "must be >= 1".to_string()));
        }
        if self.ram_mb < 1 {
            out.push(("ram_mb", "must be >= 1".to_string()));
        }
        if !(self.hourly_cost.is_finite() && self.hourly_cost >= 0.0) {
            out.push(("hourly_cost", format!("must be finite and >= 0, got {}", self.hourly_cost)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub vms: Vec<VmSpec>,
}

impl Default for ClusterSpec {
    /// Three default workers, 12 vCPUs total.
    fn default() -> Self {
        Self {
            vms: vec![VmSpec::default(); 3],
        }
    }
}

impl ClusterSpec {
    pub fn total_vcpus(&self) -> u32 {
        self.vms.iter().map(|vm| vm.vcpus).sum()
    }

    pub fn hourly_cost(&self) -> f64 {
        self.vms.iter().map(|vm| vm.hourly_cost).sum()
    }

    pub fn len(&self) -> usize {
        self.vms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vms.is_empty()
    }
}

/// A resized cluster plus the reconfiguration delay the resize costs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleOutcome {
    pub cluster: ClusterSpec,
    pub reconfiguration_delay_ms: f64,
}

/// Add (`delta_vms > 0`) or remove VMs at the tail of the VM list.
///
/// Removal fails when it would leave no VM, or when a removed VM still
/// hosts replicas under `placement`. Callers rebalance first.
pub fn scale_cluster(
    cluster: &ClusterSpec,
    delta_vms: i32,
    vm: &VmSpec,
    placement: Option<&Placement>,
) -> Result<ScaleOutcome, SimError> {
    let current = cluster.vms.len() as i64;
    let target = current + i64::from(delta_vms);
    if target < 1 {
        return Err(SimError::Capacity(format!(
            "cannot scale {current} VMs by {delta_vms}: at least one VM must remain"
        )));
    }
    let mut next = cluster.clone();
    if delta_vms >= 0 {
        next.vms
            .extend(std::iter::repeat_n(vm.clone(), delta_vms as usize));
    } else {
        let target = target as usize;
        if let Some(placement) = placement {
            for idx in target..cluster.vms.len() {
                let hosted = placement.replicas_on(idx);
                if hosted > 0 {
                    return Err(SimError::Capacity(format!(
                        "VM {idx} still hosts {hosted} replica(s); rebalance before removal"
                    )));
                }
            }
        }
        next.vms.truncate(target);
    }
    Ok(ScaleOutcome {
        cluster: next,
        reconfiguration_delay_ms: VM_PROVISION_DELAY_MS * f64::from(delta_vms.unsigned_abs()),
    })
}
