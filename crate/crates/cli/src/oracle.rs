//! `oracle`: exhaustive enumeration of the executor grid, noise off.

use serde::{Deserialize, Serialize};
use sspe_core::sim::{expected_processing_time_ms, CostModelParams, ExecutorConfig, WorkloadSpec};

use crate::config::RunConfig;
use crate::error::CliError;

pub const ORACLE_FILE: &str = "oracle.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub fps: u32,
    pub best_cores: u32,
    pub best_memory_mb: u32,
    pub best_instances: u32,
    pub best_time_ms: f64,
    pub worst_time_ms: f64,
    pub mean_time_ms: f64,
}

impl OracleRow {
    pub fn best_config(&self) -> ExecutorConfig {
        ExecutorConfig::new(self.best_cores, self.best_memory_mb, self.best_instances)
            .expect("oracle rows hold grid configurations")
    }
}

pub fn oracle_row(workload: &WorkloadSpec, params: &CostModelParams) -> OracleRow {
    let grid = ExecutorConfig::grid();
    let times: Vec<f64> = grid
        .iter()
        .map(|c| expected_processing_time_ms(c, workload, params))
        .collect();
    // first strict minimum, so ties go to the lexicographically smallest config
    let (best_idx, best) = times
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &t)| if t < acc.1 { (i, t) } else { acc });
    let b = grid[best_idx];
    OracleRow {
        fps: workload.fps(),
        best_cores: b.cores(),
        best_memory_mb: b.memory_mb(),
        best_instances: b.instances(),
        best_time_ms: best,
        worst_time_ms: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_time_ms: times.iter().sum::<f64>() / times.len() as f64,
    }
}

/// One row per configured evaluation fps. Writes oracle.csv to the run directory.
pub fn cmd_oracle(cfg: &RunConfig) -> Result<Vec<OracleRow>, CliError> {
    cfg.validate()?;
    if cfg.sim.cost_model.noise_enabled {
        log::info!("oracle uses expected times; configured noise is ignored");
    }
    let rows = cfg
        .evaluation
        .fps
        .iter()
        .map(|&fps| {
            let w = WorkloadSpec::new(fps, cfg.workload.partitions, cfg.workload.frames_per_partition)?;
            Ok(oracle_row(&w, &cfg.sim.cost_model))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join(ORACLE_FILE))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(&cfg.out_dir.join(ORACLE_FILE), e))?;
    Ok(rows)
}
