//! Batch cost surface for a Spark-like executor pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{SimError, SimMetrics};

pub const CORES_RANGE: (u32, u32) = (1, 3);
pub const MEMORY_RANGE_MB: (u32, u32) = (500, 1000);
pub const MEMORY_STEP_MB: u32 = 100;
pub const INSTANCES_RANGE: (u32, u32) = (5, 8);

pub const FPS_RANGE: (u32, u32) = (10, 60);
pub const PARTITIONS_RANGE: (u32, u32) = (5, 8);
pub const FRAMES_PER_PARTITION_RANGE: (u32, u32) = (10, 60);

/// Micro-batch interval; work that overruns it accumulates as backlog.
pub const BATCH_INTERVAL_MS: f64 = 1000.0;
/// Buffered megabytes per (frame/s · frame-per-partition).
pub const FRAME_BUFFER_MB: f64 = 0.5;
/// Serverless billing: executors pay for what they reserve.
pub const CORE_HOUR_COST: f64 = 0.034;
pub const GB_HOUR_COST: f64 = 0.0045;

/// The three executor knobs the tuner controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawExecutorConfig")]
pub struct ExecutorConfig {
    cores: u32,
    memory_mb: u32,
    instances: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExecutorConfig {
    cores: u32,
    memory_mb: u32,
    instances: u32,
}

impl TryFrom<RawExecutorConfig> for ExecutorConfig {
    type Error = SimError;

    fn try_from(raw: RawExecutorConfig) -> Result<Self, Self::Error> {
        ExecutorConfig::new(raw.cores, raw.memory_mb, raw.instances)
    }
}

fn check_range(field: &'static str, value: u32, (lo, hi): (u32, u32)) -> Result<(), SimError> {
    if value < lo || value > hi {
        return Err(SimError::OutOfBounds {
            field,
            value: value as f64,
            min: lo as f64,
            max: hi as f64,
        });
    }
    Ok(())
}

impl ExecutorConfig {
    pub fn new(cores: u32, memory_mb: u32, instances: u32) -> Result<Self, SimError> {
        check_range("cores", cores, CORES_RANGE)?;
        check_range("memory_mb", memory_mb, MEMORY_RANGE_MB)?;
        if !memory_mb.is_multiple_of(MEMORY_STEP_MB) {
            return Err(SimError::NotOnGrid {
                field: "memory_mb",
                value: memory_mb,
                step: MEMORY_STEP_MB,
            });
        }
        check_range("instances", instances, INSTANCES_RANGE)?;
        Ok(Self {
            cores,
            memory_mb,
            instances,
        })
    }

    pub fn cores(&self) -> u32 {
        self.cores
    }

    pub fn memory_mb(&self) -> u32 {
        self.memory_mb
    }

    pub fn instances(&self) -> u32 {
        self.instances
    }

    /// Total cores requested across all executors.
    pub fn requested_cores(&self) -> u32 {
        self.cores * self.instances
    }

    /// Every valid configuration in lexicographic (cores, memory_mb, instances) order.
    pub fn grid() -> Vec<ExecutorConfig> {
        let mut out = Vec::with_capacity(72);
        for cores in CORES_RANGE.0..=CORES_RANGE.1 {
            for memory_mb in (MEMORY_RANGE_MB.0..=MEMORY_RANGE_MB.1).step_by(MEMORY_STEP_MB as usize)
            {
                for instances in INSTANCES_RANGE.0..=INSTANCES_RANGE.1 {
                    out.push(ExecutorConfig {
                        cores,
                        memory_mb,
                        instances,
                    });
                }
            }
        }
        out
    }

    /// Grid midpoint, the default starting configuration of an episode.
    pub fn midpoint() -> Self {
        ExecutorConfig {
            cores: 2,
            memory_mb: 700,
            instances: 6,
        }
    }
}

impl std::fmt::Display for ExecutorConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.cores, self.memory_mb, self.instances)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawWorkloadSpec")]
pub struct WorkloadSpec {
    fps: u32,
    partitions: u32,
    frames_per_partition: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkloadSpec {
    fps: u32,
    partitions: u32,
    frames_per_partition: u32,
}

impl TryFrom<RawWorkloadSpec> for WorkloadSpec {
    type Error = SimError;

    fn try_from(raw: RawWorkloadSpec) -> Result<Self, Self::Error> {
        WorkloadSpec::new(raw.fps, raw.partitions, raw.frames_per_partition)
    }
}

impl WorkloadSpec {
    pub fn new(fps: u32, partitions: u32, frames_per_partition: u32) -> Result<Self, SimError> {
        check_range("fps", fps, FPS_RANGE)?;
        check_range("partitions", partitions, PARTITIONS_RANGE)?;
        check_range(
            "frames_per_partition",
            frames_per_partition,
            FRAMES_PER_PARTITION_RANGE,
        )?;
        Ok(Self {
            fps,
            partitions,
            frames_per_partition,
        })
    }

    /// Workload at `fps` with 5 partitions of 30 frames.
    pub fn with_fps(fps: u32) -> Result<Self, SimError> {
        Self::new(fps, 5, 30)
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn partitions(&self) -> u32 {
        self.partitions
    }

    pub fn frames_per_partition(&self) -> u32 {
        self.frames_per_partition
    }

    pub fn frames_per_batch(&self) -> u32 {
        self.partitions * self.frames_per_partition
    }
}

/// Calibration constants of the batch cost surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModelParams {
    /// Fixed per-batch overhead, ms.
    pub k0: f64,
    /// Parallel work coefficient, ms per (frame/s) per effective core.
    pub k1: f64,
    /// Per-instance coordination overhead, ms.
    pub k2: f64,
    /// Physical core budget of the cluster.
    pub phys_cores: u32,
    pub noise_sigma: f64,
    pub noise_enabled: bool,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self {
            k0: 50.0,
            k1: 96.0,
            k2: 20.0,
            phys_cores: 12,
            noise_sigma: 0.05,
            noise_enabled: true,
        }
    }
}

impl CostModelParams {
    pub fn noiseless() -> Self {
        Self {
            noise_enabled: false,
            ..Self::default()
        }
    }

    /// Returns `(field, message)` for each violated invariant.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (name, v) in [("k0", self.k0), ("k1", self.k1), ("k2", self.k2)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push((name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.phys_cores < 1 {
            out.push(("phys_cores", "must be >= 1".to_string()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            out.push((
                "noise_sigma",
                format!("must be finite and >= 0, got {}", self.noise_sigma),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((field, message)) => Err(SimError::InvalidParams { field, message }),
        }
    }
}

/// Effective-memory multiplier: linear from 0.5 at 500 MB to 1.0 at 1000 MB.
pub fn mem_factor(memory_mb: u32) -> Result<f64, SimError> {
    check_range("memory_mb", memory_mb, MEMORY_RANGE_MB)?;
    Ok(0.5 + 0.5 * f64::from(memory_mb - MEMORY_RANGE_MB.0) / 500.0)
}

/// Over-provisioning slowdown once requested cores exceed the physical budget.
pub fn contention(config: &ExecutorConfig, params: &CostModelParams) -> f64 {
    let ratio = f64::from(config.requested_cores()) / f64::from(params.phys_cores);
    ratio.max(1.0).powi(2)
}

/// Processing time with noise disabled.
pub fn expected_processing_time_ms(
    config: &ExecutorConfig,
    workload: &WorkloadSpec,
    params: &CostModelParams,
) -> f64 {
    // memory is grid-validated by ExecutorConfig
    let mf = mem_factor(config.memory_mb).expect("validated memory");
    let effective_cores = f64::from(config.requested_cores()) * mf;
    let base = params.k0
        + params.k1 * f64::from(workload.fps) / effective_cores
        + params.k2 * f64::from(config.instances);
    base * contention(config, params)
}

/// Hourly cost of the executor reservation.
pub fn executor_cost_rate(config: &ExecutorConfig) -> f64 {
    let per_executor =
        f64::from(config.cores) * CORE_HOUR_COST + f64::from(config.memory_mb) / 1024.0 * GB_HOUR_COST;
    per_executor * f64::from(config.instances)
}

/// Cost rate of the most expensive grid configuration.
pub fn max_executor_cost_rate() -> f64 {
    let top = ExecutorConfig {
        cores: CORES_RANGE.1,
        memory_mb: MEMORY_RANGE_MB.1,
        instances: INSTANCES_RANGE.1,
    };
    executor_cost_rate(&top)
}

/// Multiplicative lognormal(0, sigma) factor; 1.0 when noise is off.
pub fn noise_factor(params: &CostModelParams, seed: u64) -> f64 {
    if !params.noise_enabled || params.noise_sigma == 0.0 {
        return 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = LogNormal::new(0.0, params.noise_sigma).expect("sigma validated finite and >= 0");
    dist.sample(&mut rng)
}

/// Run one micro-batch of the video workload under `config`.
pub fn simulate_batch(
    config: &ExecutorConfig,
    workload: &WorkloadSpec,
    params: &CostModelParams,
    seed: u64,
) -> SimMetrics {
    let processing_time_ms =
        expected_processing_time_ms(config, workload, params) * noise_factor(params, seed);

    let fps = f64::from(workload.fps);
    let busy_cores = f64::from(config.requested_cores().min(params.phys_cores));
    // core-ms of parallel work over core-ms available during the batch
    let cpu_util_pct = clip_pct(100.0 * params.k1 * fps / (processing_time_ms * busy_cores));
    let demand_mb = fps * f64::from(workload.frames_per_partition) * FRAME_BUFFER_MB;
    let capacity_mb = f64::from(config.memory_mb * config.instances);
    let mem_util_pct = clip_pct(100.0 * demand_mb / capacity_mb);

    let backlog = fps * (processing_time_ms - BATCH_INTERVAL_MS).max(0.0) / 1000.0;

    SimMetrics {
        processing_time_ms,
        throughput_tps: f64::from(workload.frames_per_batch()) * 1000.0 / processing_time_ms,
        latency_ms: processing_time_ms,
        queue_lengths: vec![backlog],
        backpressure: backlog > 0.0,
        cpu_util_pct,
        mem_util_pct,
        infra_cost_rate: executor_cost_rate(config),
        contention: contention(config, params),
    }
}

fn clip_pct(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 100.0)
    }
}

/// Exhaustive search over the 72-point grid with noise disabled.
///
/// Ties resolve to the lexicographically smallest (cores, memory_mb, instances).
pub fn brute_force_optimum(workload: &WorkloadSpec, params: &CostModelParams) -> (ExecutorConfig, f64) {
    let mut best: Option<(ExecutorConfig, f64)> = None;
    for config in ExecutorConfig::grid() {
        let t = expected_processing_time_ms(&config, workload, params);
        match best {
            Some((_, bt)) if t >= bt => {}
            _ => best = Some((config, t)),
        }
    }
    best.expect("grid is nonempty")
}
