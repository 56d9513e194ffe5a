//! Run configuration: one JSON document, unknown keys rejected, every nested
//! invariant checked before anything runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sspe_core::dqn::Hyperparams;
use sspe_core::env::{EnvConfig, WorkloadSource, OBS_DIM};
use sspe_core::madrl::{AgentRole, MadrlConfig, TUNER_PARAMS};
use sspe_core::sim::cost::FPS_RANGE;
use sspe_core::sim::{ClusterSpec, CostModelParams, Placement, Topology};

use crate::error::{CliError, Violation};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub cost_model: CostModelParams,
    pub cluster: ClusterSpec,
    pub topology: Option<Topology>,
    /// Initial replica placement; spread over the cluster when absent.
    pub placement: Option<Placement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Defaults to `learner.max_episodes`.
    pub episodes: Option<u32>,
    /// Stop after this many environment steps even mid-episode.
    pub step_budget: Option<u64>,
    pub checkpoint_every: u32,
    /// Event log whose records seed the replay buffer before online learning.
    pub pretrain_trace: Option<PathBuf>,
    pub pretrain_epochs: usize,
    pub fps_schedule: FpsSchedule,
    /// Episodes per stratified block; the fps range is cut into this many strata.
    pub stratum_block: u32,
}

/// How episode frame rates are chosen when the workload gives a range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpsSchedule {
    /// The environment draws uniformly at every reset.
    #[default]
    Sampled,
    /// Every block of `stratum_block` episodes visits each stratum of the
    /// range once, in shuffled order.
    Stratified,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            episodes: None,
            step_budget: None,
            checkpoint_every: 10,
            pretrain_trace: None,
            pretrain_epochs: 5,
            fps_schedule: FpsSchedule::Sampled,
            stratum_block: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub fps: Vec<u32>,
    pub batches: u32,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            fps: vec![10, 20, 30, 40, 50, 60],
            batches: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub role: AgentRole,
    /// Defaults to the role's standard partition.
    #[serde(default)]
    pub state_partition: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub sim: SimSection,
    pub workload: WorkloadSource,
    pub env: EnvConfig,
    pub learner: Hyperparams,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    /// Multi-agent roster in round-robin order; single-agent when absent.
    pub agents: Option<Vec<AgentEntry>>,
    pub madrl: MadrlConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            sim: SimSection::default(),
            workload: WorkloadSource::default(),
            env: EnvConfig::default(),
            learner: Hyperparams::default(),
            training: TrainingSection::default(),
            evaluation: EvaluationSection::default(),
            agents: None,
            madrl: MadrlConfig::default(),
        }
    }
}

fn prefixed<'a, F: Into<String> + 'a>(prefix: &'a str, v: Vec<(F, String)>) -> impl Iterator<Item = Violation> + 'a {
    v.into_iter().map(move |(f, m)| (format!("{prefix}.{}", f.into()), m))
}

impl RunConfig {
    /// Parse and validate. Syntax and unknown-key errors carry the JSON path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Validation(vec![(path, e.into_inner().to_string())])
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn episodes(&self) -> u32 {
        self.training.episodes.unwrap_or(self.learner.max_episodes)
    }

    pub fn is_multi_agent(&self) -> bool {
        self.agents.is_some()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(v))
        }
    }

    /// Every violated invariant, with its field path.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> = Vec::new();
        let sim = &self.sim;
        out.extend(prefixed("sim.cost_model", sim.cost_model.violations()));
        if sim.cluster.is_empty() {
            out.push(("sim.cluster.vms".into(), "at least one VM is required".into()));
        }
        for (i, vm) in sim.cluster.vms.iter().enumerate() {
            out.extend(prefixed(&format!("sim.cluster.vms[{i}]"), vm.violations()));
        }
        if !sim.cluster.is_empty() && sim.cost_model.phys_cores != sim.cluster.total_vcpus() {
            out.push((
                "sim.cost_model.phys_cores".into(),
                format!(
                    "must equal the cluster's vCPU total {}, got {}",
                    sim.cluster.total_vcpus(),
                    sim.cost_model.phys_cores
                ),
            ));
        }
        if sim.cluster.len() > self.env.max_vms as usize {
            out.push((
                "sim.cluster.vms".into(),
                format!("{} VMs exceed env.max_vms = {}", sim.cluster.len(), self.env.max_vms),
            ));
        }
        match (&sim.topology, &sim.placement) {
            (None, Some(_)) => out.push(("sim.placement".into(), "given without a topology".into())),
            (Some(t), Some(p)) => {
                if let Err(e) = p.validate(t, &sim.cluster) {
                    out.push(("sim.placement".into(), e.to_string()));
                }
            }
            (Some(t), None) => {
                if let Err(e) = Placement::spread(t, &sim.cluster) {
                    out.push(("sim.topology".into(), e.to_string()));
                }
            }
            (None, None) => {}
        }

        out.extend(prefixed("workload", self.workload.violations()));
        out.extend(prefixed("env", self.env.violations()));
        out.extend(prefixed("learner", self.learner.violations()));

        let t = &self.training;
        if t.episodes == Some(0) {
            out.push(("training.episodes".into(), "must be >= 1".into()));
        }
        if t.step_budget == Some(0) {
            out.push(("training.step_budget".into(), "must be >= 1".into()));
        }
        if t.checkpoint_every < 1 {
            out.push(("training.checkpoint_every".into(), "must be >= 1".into()));
        }
        if t.stratum_block < 1 {
            out.push(("training.stratum_block".into(), "must be >= 1".into()));
        }

        if self.evaluation.fps.is_empty() {
            out.push(("evaluation.fps".into(), "at least one fps is required".into()));
        }
        for (i, &f) in self.evaluation.fps.iter().enumerate() {
            if !(FPS_RANGE.0..=FPS_RANGE.1).contains(&f) {
                out.push((
                    format!("evaluation.fps[{i}]"),
                    format!("{f} outside [{}, {}]", FPS_RANGE.0, FPS_RANGE.1),
                ));
            }
        }
        if self.evaluation.batches < 1 {
            out.push(("evaluation.batches".into(), "must be >= 1".into()));
        }

        out.extend(prefixed("madrl", self.madrl.violations()));
        if let Some(agents) = &self.agents {
            self.agent_violations(agents, &mut out);
        }
        out
    }

    fn agent_violations(&self, agents: &[AgentEntry], out: &mut Vec<Violation>) {
        if agents.is_empty() {
            out.push(("agents".into(), "roster must name at least one agent".into()));
        }
        if self.env.reward.beta <= 0.0 {
            out.push(("env.reward.beta".into(), "must be > 0 when agents are configured".into()));
        }
        let n_components = self.sim.topology.as_ref().map_or(0, |t| t.len());
        let global_dim = OBS_DIM + 2 + 2 * n_components + TUNER_PARAMS.len();
        for (i, a) in agents.iter().enumerate() {
            let path = format!("agents[{i}]");
            if agents[..i].iter().any(|b| b.role == a.role) {
                out.push((format!("{path}.role"), format!("{} listed twice", a.role)));
            }
            if a.role.needs_topology() && self.sim.topology.is_none() {
                out.push((format!("{path}.role"), format!("{} needs sim.topology", a.role)));
            }
            if let Some(p) = &a.state_partition {
                if p.is_empty() {
                    out.push((format!("{path}.state_partition"), "must not be empty".into()));
                }
                if let Some(bad) = p.iter().find(|&&j| j >= global_dim) {
                    out.push((
                        format!("{path}.state_partition"),
                        format!("index {bad} outside the {global_dim}-feature observation"),
                    ));
                }
            }
        }
    }
}
