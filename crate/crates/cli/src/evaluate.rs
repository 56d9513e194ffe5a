//! `evaluate`: training-curve statistics plus a greedy SLO check.

use std::path::Path;

use serde::Serialize;
use sspe_core::telemetry::read_log;

use crate::compare::{bucket_seeds, load_greedy, run_bucket};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::per_step;
use crate::stats::{mean, plateau_statistic, RewardSeries};
use crate::train::EVENTS_FILE;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateSummary {
    /// From the run's events.jsonl; absent when the run directory has none.
    pub training_steps: Option<u64>,
    pub final_running_avg_reward: Option<f64>,
    pub plateau_statistic: Option<f64>,
    pub greedy_batches: u64,
    pub greedy_mean_ms: f64,
    pub slo_satisfaction_rate: f64,
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<EvaluateSummary, CliError> {
    cfg.validate()?;
    let policy = load_greedy(cfg, checkpoint)?;

    let events = cfg.out_dir.join(EVENTS_FILE);
    let (training_steps, final_avg, plateau) = if events.exists() {
        let log = read_log(&events)?;
        if log.records.is_empty() {
            return Err(CliError::NoData(format!("{} holds no step records", events.display())));
        }
        let mut series = RewardSeries::new();
        let running: Vec<f64> = per_step(&log.records)
            .into_iter()
            .map(|r| series.push(r.episode, r.reward).running_avg_1000)
            .collect();
        (
            Some(running.len() as u64),
            running.last().copied(),
            plateau_statistic(&running),
        )
    } else {
        log::info!("{} not found; reporting greedy rollout only", events.display());
        (None, None, None)
    };

    let mut times = Vec::new();
    let mut met = 0u64;
    for &fps in &cfg.evaluation.fps {
        let seeds = bucket_seeds(cfg.seed, fps, cfg.evaluation.batches);
        let b = run_bucket(cfg, &policy, fps, &seeds)?;
        met += b
            .latencies_ms
            .iter()
            .zip(&b.throughputs_tps)
            .filter(|&(&l, &t)| cfg.env.slo.satisfied_by(l, t))
            .count() as u64;
        times.extend(b.times_ms);
    }
    Ok(EvaluateSummary {
        training_steps,
        final_running_avg_reward: final_avg,
        plateau_statistic: plateau,
        greedy_batches: times.len() as u64,
        greedy_mean_ms: mean(&times).unwrap_or(f64::NAN),
        slo_satisfaction_rate: met as f64 / times.len() as f64,
    })
}
