//! The tuning problem as a Markov decision process.
//!
//! An episode pins a workload (fps sampled per episode unless fixed), starts
//! from a fixed executor configuration and runs `horizon` batches. Each step
//! decodes an action into a new configuration, runs one simulated batch and
//! rewards the inverse of its processing time.

pub mod codec;
pub mod reward;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{ActionCodec, Knob};
pub use reward::{compute_reward, slo_satisfied, RewardSpec, SloKind, SloSpec};

use crate::seed;
use crate::sim::cost::{executor_cost_rate, max_executor_cost_rate, FPS_RANGE};
use crate::sim::{
    simulate_batch, ClusterSpec, CostModelParams, ExecutorConfig, ReconfigDelays, SimError,
    SimMetrics, VmSpec, WorkloadSpec,
};
use crate::telemetry::EventLogRecord;

/// Length of the observation vector.
pub const OBS_DIM: usize = 9;
/// Processing times at or above this map to 1.0 in the observation.
pub const OBS_TIME_SCALE_MS: f64 = 2000.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("codec error: {0}")]
    Codec(String),
    #[error("lifecycle error: {0}")]
    Lifecycle(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Normalized features in `[0, 1]`; see [`OBS_DIM`] for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How each episode's frame rate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FpsSource {
    Pinned(u32),
    Range { min: u32, max: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSource {
    pub fps: FpsSource,
    pub partitions: u32,
    pub frames_per_partition: u32,
}

impl Default for WorkloadSource {
    fn default() -> Self {
        Self {
            fps: FpsSource::Range {
                min: FPS_RANGE.0,
                max: FPS_RANGE.1,
            },
            partitions: 5,
            frames_per_partition: 30,
        }
    }
}

impl WorkloadSource {
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let probe = |fps| WorkloadSpec::new(fps, self.partitions, self.frames_per_partition);
        match self.fps {
            FpsSource::Pinned(f) => {
                if let Err(e) = probe(f) {
                    out.push(("fps.pinned".into(), e.to_string()));
                }
            }
            FpsSource::Range { min, max } => {
                if min > max {
                    out.push(("fps.range".into(), format!("min {min} > max {max}")));
                }
                for (name, f) in [("fps.range.min", min), ("fps.range.max", max)] {
                    if let Err(SimError::OutOfBounds { field: "fps", .. }) = probe(f) {
                        out.push((name.into(), format!("{f} outside [{}, {}]", FPS_RANGE.0, FPS_RANGE.1)));
                    }
                }
            }
        }
        if let Err(e) = WorkloadSpec::new(FPS_RANGE.0, self.partitions, self.frames_per_partition) {
            let field = match &e {
                SimError::OutOfBounds { field, .. } => *field,
                _ => "workload",
            };
            out.push((field.to_string(), e.to_string()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub codec: ActionCodec,
    pub horizon: u32,
    pub reward: RewardSpec,
    pub slo: SloSpec,
    pub initial_config: ExecutorConfig,
    /// Upper bound on cluster size, used to normalize the cost feature.
    pub max_vms: u32,
    pub delays: ReconfigDelays,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            codec: ActionCodec::Direct,
            horizon: 500,
            reward: RewardSpec::default(),
            slo: SloSpec::default(),
            initial_config: ExecutorConfig::midpoint(),
            max_vms: 6,
            delays: ReconfigDelays::default(),
        }
    }
}

impl EnvConfig {
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let prefixed = |p: &str, v: Vec<(&'static str, String)>| {
            v.into_iter()
                .map(|(f, m)| (format!("{p}.{f}"), m))
                .collect::<Vec<_>>()
        };
        out.extend(prefixed("codec", self.codec.violations()));
        out.extend(prefixed("reward", self.reward.violations()));
        out.extend(prefixed("slo", self.slo.violations()));
        out.extend(prefixed("delays", self.delays.violations()));
        if self.horizon < 1 {
            out.push(("horizon".into(), "must be >= 1".into()));
        }
        if self.max_vms < 1 {
            out.push(("max_vms".into(), "must be >= 1".into()));
        }
        out
    }
}

/// Scales executor plus VM lease cost into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostNormalizer {
    max_total: f64,
}

impl CostNormalizer {
    pub fn new(max_vms: u32, template: &VmSpec) -> Self {
        Self {
            max_total: max_executor_cost_rate() + f64::from(max_vms) * template.hourly_cost,
        }
    }

    pub fn normalize(&self, executor_cost: f64, cluster: &ClusterSpec) -> f64 {
        ((executor_cost + cluster.hourly_cost()) / self.max_total).clamp(0.0, 1.0)
    }
}

/// Everything produced by one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub metrics: SimMetrics,
    pub config: ExecutorConfig,
    /// Simulated batch time plus the amortized reconfiguration delay.
    pub effective_time_ms: f64,
    pub reconfig_delay_ms: f64,
    pub cost_rate_norm: f64,
    /// Telemetry for this step; the learner fills `epsilon` and `loss`.
    pub record: EventLogRecord,
}

pub struct StreamEnv {
    cfg: EnvConfig,
    workload_source: WorkloadSource,
    params: CostModelParams,
    cluster: ClusterSpec,
    normalizer: CostNormalizer,
    rng: ChaCha8Rng,
    config: ExecutorConfig,
    workload: WorkloadSpec,
    last: Option<SimMetrics>,
    step_idx: u32,
    episode: u64,
    done: bool,
    clock_ms: f64,
}

impl StreamEnv {
    pub fn new(
        cfg: EnvConfig,
        workload_source: WorkloadSource,
        params: CostModelParams,
        cluster: ClusterSpec,
        seed: u64,
    ) -> Result<Self, EnvError> {
        if let Some((field, msg)) = cfg.violations().into_iter().next() {
            return Err(EnvError::Domain(format!("env.{field}: {msg}")));
        }
        if let Some((field, msg)) = workload_source.violations().into_iter().next() {
            return Err(EnvError::Domain(format!("workload.{field}: {msg}")));
        }
        params.validate()?;
        if cluster.is_empty() {
            return Err(EnvError::Domain("cluster has no VMs".into()));
        }
        let template = cluster.vms[0].clone();
        let workload = WorkloadSpec::new(
            FPS_RANGE.0,
            workload_source.partitions,
            workload_source.frames_per_partition,
        )?;
        Ok(Self {
            normalizer: CostNormalizer::new(cfg.max_vms, &template),
            config: cfg.initial_config,
            cfg,
            workload_source,
            params,
            cluster,
            rng: seed::rng(seed, seed::stream::ENV),
            workload,
            last: None,
            step_idx: 0,
            episode: 0,
            done: true,
            clock_ms: 0.0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn codec(&self) -> &ActionCodec {
        &self.cfg.codec
    }

    pub fn n_actions(&self) -> usize {
        self.cfg.codec.cardinality()
    }

    pub fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    pub fn executor_config(&self) -> ExecutorConfig {
        self.config
    }

    pub fn workload(&self) -> WorkloadSpec {
        self.workload
    }

    pub fn params(&self) -> &CostModelParams {
        &self.params
    }

    pub fn cluster(&self) -> &ClusterSpec {
        &self.cluster
    }

    pub fn normalizer(&self) -> &CostNormalizer {
        &self.normalizer
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn step_index(&self) -> u32 {
        self.step_idx
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn last_metrics(&self) -> Option<&SimMetrics> {
        self.last.as_ref()
    }

    /// Replace the cluster; the physical core budget follows its vCPU total.
    pub fn set_cluster(&mut self, cluster: ClusterSpec) {
        self.params.phys_cores = cluster.total_vcpus().max(1);
        self.cluster = cluster;
    }

    /// Start a new episode. `fps` overrides the configured source when given.
    pub fn reset(&mut self, fps: Option<u32>) -> Result<Observation, EnvError> {
        let fps = match (fps, self.workload_source.fps) {
            (Some(f), _) | (None, FpsSource::Pinned(f)) => f,
            (None, FpsSource::Range { min, max }) => self.rng.random_range(min..=max),
        };
        self.workload = WorkloadSpec::new(
            fps,
            self.workload_source.partitions,
            self.workload_source.frames_per_partition,
        )?;
        self.config = self.cfg.initial_config;
        self.episode += 1;
        self.step_idx = 0;
        self.done = false;
        let seed = self.rng.next_u64();
        self.last = Some(simulate_batch(&self.config, &self.workload, &self.params, seed));
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observation {
        self.observe_with(&self.config)
    }

    /// Observation as if `config` were already in place; metrics stay those of the last batch.
    pub fn observe_with(&self, config: &ExecutorConfig) -> Observation {
        let c = config;
        let (time, cpu, mem, bp) = match &self.last {
            Some(m) => (
                m.processing_time_ms,
                m.cpu_util_pct,
                m.mem_util_pct,
                m.backpressure,
            ),
            None => (0.0, 0.0, 0.0, false),
        };
        let cost = self
            .normalizer
            .normalize(executor_cost_rate(c), &self.cluster);
        Observation(vec![
            f64::from(self.workload.fps()) / f64::from(FPS_RANGE.1),
            f64::from(c.cores()) / 3.0,
            f64::from(c.memory_mb()) / 1000.0,
            f64::from(c.instances()) / 8.0,
            (time / OBS_TIME_SCALE_MS).min(1.0),
            cpu / 100.0,
            mem / 100.0,
            if bp { 1.0 } else { 0.0 },
            cost,
        ])
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        self.ensure_running()?;
        let next = self.cfg.codec.decode(action, &self.config)?;
        let seed = self.rng.next_u64();
        self.advance(next, action, 0.0, seed)
    }

    /// As [`step`](Self::step) with the batch noise seed supplied by the caller.
    pub fn step_seeded(&mut self, action: usize, seed: u64) -> Result<StepOutcome, EnvError> {
        self.ensure_running()?;
        let next = self.cfg.codec.decode(action, &self.config)?;
        self.advance(next, action, 0.0, seed)
    }

    /// Draw the noise seed for the next batch from the environment stream.
    pub fn next_batch_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Move to `next`, run one batch and score it.
    ///
    /// `extra_delay_ms` is reconfiguration delay from other enactors, already
    /// amortized; a change of executor configuration adds its own.
    pub fn advance(
        &mut self,
        next: ExecutorConfig,
        action: usize,
        extra_delay_ms: f64,
        seed: u64,
    ) -> Result<StepOutcome, EnvError> {
        self.ensure_running()?;
        let state = self.observe();
        let mut delay = extra_delay_ms;
        if next != self.config {
            delay += self.cfg.delays.config_delta_ms * self.cfg.delays.amortization;
        }
        self.config = next;
        let metrics = simulate_batch(&self.config, &self.workload, &self.params, seed);
        let effective = metrics.processing_time_ms + delay;
        let cost_rate_norm = self
            .normalizer
            .normalize(metrics.infra_cost_rate, &self.cluster);
        let reward = compute_reward(effective, cost_rate_norm, &self.cfg.reward)?;
        self.step_idx += 1;
        self.done = self.step_idx >= self.cfg.horizon;
        self.clock_ms += effective;

        let mut record = EventLogRecord {
            ts: self.clock_ms,
            episode: self.episode,
            step: u64::from(self.step_idx),
            fps: self.workload.fps(),
            partitions: self.workload.partitions(),
            frames_per_partition: self.workload.frames_per_partition(),
            cores: next.cores(),
            memory_mb: next.memory_mb(),
            instances: next.instances(),
            processing_time_ms: effective,
            reward,
            epsilon: 0.0,
            loss: None,
            cpu_util_pct: metrics.cpu_util_pct,
            mem_util_pct: metrics.mem_util_pct,
            contention: metrics.contention,
            agent_role: None,
            action_index: action as u32,
            applied: true,
            reconfig_delay_ms: delay,
            throughput_tps: metrics.throughput_tps,
            state: state.0,
            next_state: Vec::new(),
            done: self.done,
            extra: Default::default(),
        };
        self.last = Some(metrics.clone());
        let observation = self.observe();
        record.next_state = observation.0.clone();
        Ok(StepOutcome {
            observation,
            reward,
            done: self.done,
            metrics,
            config: next,
            effective_time_ms: effective,
            reconfig_delay_ms: delay,
            cost_rate_norm,
            record,
        })
    }

    fn ensure_running(&self) -> Result<(), EnvError> {
        if self.done {
            return Err(EnvError::Lifecycle(if self.episode == 0 {
                "step before reset"
            } else {
                "step after episode end"
            }));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(codec: ActionCodec, horizon: u32, seed: u64) -> StreamEnv {
        StreamEnv::new(
            EnvConfig {
                codec,
                horizon,
                ..Default::default()
            },
            WorkloadSource::default(),
            CostModelParams::default(),
            ClusterSpec::default(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn reset_normalizes_pinned_fps() {
        let mut e = env(ActionCodec::Direct, 5, 1);
        let o = e.reset(Some(10)).unwrap();
        assert!((o.0[0] - 10.0 / 60.0).abs() < 1e-12);
        assert_eq!(e.reset(Some(60)).unwrap().0[0], 1.0);
        assert_eq!(o.len(), OBS_DIM);
        assert!(o.0.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_reset() {
        let a = env(ActionCodec::Direct, 5, 9).reset(None).unwrap();
        let b = env(ActionCodec::Direct, 5, 9).reset(None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reset_starts_at_midpoint() {
        let mut e = env(ActionCodec::delta_all(), 5, 2);
        e.reset(None).unwrap();
        assert_eq!(e.executor_config(), ExecutorConfig::midpoint());
    }

    #[test]
    fn episode_has_exactly_horizon_steps() {
        for seed in 0..5 {
            let mut e = env(ActionCodec::Direct, 7, seed);
            e.reset(None).unwrap();
            let mut steps = 0;
            loop {
                steps += 1;
                if e.step(3).unwrap().done {
                    break;
                }
            }
            assert_eq!(steps, 7);
            assert!(matches!(e.step(0), Err(EnvError::Lifecycle(_))));
        }
    }

    #[test]
    fn step_before_reset_is_lifecycle_error() {
        let mut e = env(ActionCodec::Direct, 3, 0);
        assert!(matches!(e.step(0), Err(EnvError::Lifecycle(_))));
    }

    #[test]
    fn invalid_action_is_codec_error() {
        let mut e = env(ActionCodec::Direct, 3, 0);
        e.reset(None).unwrap();
        assert!(matches!(e.step(72), Err(EnvError::Codec(_))));
    }

    #[test]
    fn delta_noop_resamples_time_only() {
        let mut e = env(ActionCodec::delta_all(), 3, 4);
        e.reset(Some(30)).unwrap();
        let before = e.last_metrics().unwrap().processing_time_ms;
        let out = e.step(13).unwrap();
        assert_eq!(out.config, ExecutorConfig::midpoint());
        assert_eq!(out.reconfig_delay_ms, 0.0);
        assert_ne!(out.metrics.processing_time_ms, before);
    }

    #[test]
    fn reward_matches_effective_time() {
        let mut e = env(ActionCodec::Direct, 50, 5);
        e.reset(None).unwrap();
        for a in 0..50 {
            let out = e.step(a).unwrap();
            assert!((out.reward * out.effective_time_ms * 1000.0 - 1.0).abs() < 1e-12);
            assert_eq!(out.record.processing_time_ms, out.effective_time_ms);
        }
    }

    #[test]
    fn config_change_pays_amortized_delay() {
        let mut e = env(ActionCodec::Direct, 5, 3);
        e.reset(Some(20)).unwrap();
        let first = ActionCodec::encode_config(&ExecutorConfig::midpoint());
        assert_eq!(e.step(first).unwrap().reconfig_delay_ms, 0.0);
        assert_eq!(e.step(0).unwrap().reconfig_delay_ms, 10.0);
    }
}
