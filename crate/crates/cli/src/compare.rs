//! `compare`: greedy agent against a uniform-random configuration chooser.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sspe_core::dqn::{argmax, load_checkpoint, QNetwork};
use sspe_core::seed;
use sspe_core::sim::{simulate_batch, ExecutorConfig, WorkloadSpec};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::oracle::oracle_row;
use crate::runtime::build_env;
use crate::stats::mean;

pub const COMPARE_FILE: &str = "compare.csv";

/// How a bucket of evaluation batches picks its configurations.
#[derive(Debug, Clone)]
pub enum EvalPolicy {
    /// Greedy rollout of a Q-network through the environment.
    Greedy(QNetwork),
    /// A uniformly random grid configuration per batch.
    Random,
    /// The noiseless optimum for the bucket's fps, every batch.
    OraclePinned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub fps: u32,
    pub drl_mean_ms: f64,
    pub random_mean_ms: f64,
    pub improvement_pct: f64,
    pub drl_mean_cores: f64,
    pub drl_mean_memory_mb: f64,
    pub drl_mean_instances: f64,
    pub agent_decision_overhead_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

/// Per-batch results for one fps bucket.
#[derive(Debug, Clone, Default)]
pub struct Bucket {
    pub times_ms: Vec<f64>,
    pub configs: Vec<ExecutorConfig>,
    pub latencies_ms: Vec<f64>,
    pub throughputs_tps: Vec<f64>,
    pub decision_ms: Vec<f64>,
}

/// Noise seeds for the batches of one bucket; both sides of a comparison use them.
pub fn bucket_seeds(run_seed: u64, fps: u32, batches: u32) -> Vec<u64> {
    let mut rng = seed::rng(seed::derive(run_seed, seed::stream::EVAL), u64::from(fps));
    (0..batches).map(|_| rng.next_u64()).collect()
}

pub fn run_bucket(cfg: &RunConfig, policy: &EvalPolicy, fps: u32, seeds: &[u64]) -> Result<Bucket, CliError> {
    let workload = WorkloadSpec::new(fps, cfg.workload.partitions, cfg.workload.frames_per_partition)?;
    let params = &cfg.sim.cost_model;
    let mut out = Bucket::default();
    let push = |out: &mut Bucket, config: ExecutorConfig, seed: u64| {
        let m = simulate_batch(&config, &workload, params, seed);
        out.times_ms.push(m.processing_time_ms);
        out.latencies_ms.push(m.latency_ms);
        out.throughputs_tps.push(m.throughput_tps);
        out.configs.push(config);
    };
    match policy {
        EvalPolicy::Random => {
            let grid = ExecutorConfig::grid();
            let mut rng = seed::rng(seed::derive(cfg.seed, seed::stream::BASELINE), u64::from(fps));
            for &s in seeds {
                let c = grid[rng.random_range(0..grid.len())];
                push(&mut out, c, s);
            }
        }
        EvalPolicy::OraclePinned => {
            let best = oracle_row(&workload, params).best_config();
            for &s in seeds {
                push(&mut out, best, s);
            }
        }
        EvalPolicy::Greedy(net) => {
            let mut eval_cfg = cfg.clone();
            eval_cfg.env.horizon = seeds.len() as u32;
            let mut env = build_env(&eval_cfg)?;
            let mut obs = env.reset(Some(fps))?;
            for &s in seeds {
                let t = Instant::now();
                let action = argmax(&net.forward(&obs.0)?);
                out.decision_ms.push(t.elapsed().as_secs_f64() * 1000.0);
                let step = env.step_seeded(action, s)?;
                // raw batch time: reconfiguration delay is a training-time charge
                out.times_ms.push(step.metrics.processing_time_ms);
                out.latencies_ms.push(step.metrics.latency_ms);
                out.throughputs_tps.push(step.metrics.throughput_tps);
                out.configs.push(step.config);
                obs = step.observation;
            }
        }
    }
    Ok(out)
}

pub fn compare_policies(cfg: &RunConfig, drl: &EvalPolicy, baseline: &EvalPolicy) -> Result<CompareReport, CliError> {
    let mut rows = Vec::new();
    for &fps in &cfg.evaluation.fps {
        let seeds = bucket_seeds(cfg.seed, fps, cfg.evaluation.batches);
        let a = run_bucket(cfg, drl, fps, &seeds)?;
        let b = run_bucket(cfg, baseline, fps, &seeds)?;
        let drl_mean = mean(&a.times_ms).expect("batches >= 1");
        let random_mean = mean(&b.times_ms).expect("batches >= 1");
        let knob = |f: fn(&ExecutorConfig) -> u32| {
            mean(&a.configs.iter().map(|c| f64::from(f(c))).collect::<Vec<_>>()).expect("batches >= 1")
        };
        rows.push(CompareRow {
            fps,
            drl_mean_ms: drl_mean,
            random_mean_ms: random_mean,
            improvement_pct: 100.0 * (random_mean - drl_mean) / random_mean,
            drl_mean_cores: knob(ExecutorConfig::cores),
            drl_mean_memory_mb: knob(ExecutorConfig::memory_mb),
            drl_mean_instances: knob(ExecutorConfig::instances),
            agent_decision_overhead_ms: mean(&a.decision_ms).unwrap_or(0.0),
        });
    }
    Ok(CompareReport { rows })
}

pub fn load_greedy(cfg: &RunConfig, checkpoint: &Path) -> Result<EvalPolicy, CliError> {
    let env = build_env(cfg)?;
    let ckpt = load_checkpoint(checkpoint)?;
    ckpt.check_dims(env.obs_dim(), env.n_actions())?;
    Ok(EvalPolicy::Greedy(ckpt.network))
}

/// Greedy checkpoint against the random chooser; writes compare.csv.
pub fn cmd_compare(cfg: &RunConfig, checkpoint: &Path) -> Result<CompareReport, CliError> {
    cfg.validate()?;
    let drl = load_greedy(cfg, checkpoint)?;
    let report = compare_policies(cfg, &drl, &EvalPolicy::Random)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let path = cfg.out_dir.join(COMPARE_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}
