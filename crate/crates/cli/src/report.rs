//! `report`: CSV tables for external plotting, rebuilt from a run directory.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sspe_core::telemetry::{read_log, EventLogRecord};

use crate::error::CliError;
use crate::stats::{mean, RewardSeries, PLATEAU_TAIL};
use crate::train::{TimingRecord, EVENTS_FILE, REWARDS_FILE, TIMING_FILE};

pub const REPORT_DIR: &str = "report";
pub const FRAMES_FILE: &str = "frames_vs_time.csv";
pub const RESOURCES_FILE: &str = "resources_vs_fps.csv";
pub const UTILIZATION_FILE: &str = "utilization_vs_fps.csv";
pub const OVERHEAD_FILE: &str = "overhead.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesRow {
    pub fps: u32,
    pub frames_per_batch: u64,
    pub batches: u64,
    pub mean_processing_time_ms: f64,
    pub min_processing_time_ms: f64,
    pub max_processing_time_ms: f64,
}

/// Executor knobs the agent settled on, over the final fifth of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcesRow {
    pub fps: u32,
    pub samples: u64,
    pub mean_cores: f64,
    pub mean_memory_mb: f64,
    pub mean_instances: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub fps: u32,
    pub samples: u64,
    pub mean_cpu_util_pct: f64,
    pub mean_mem_util_pct: f64,
    pub mean_contention: f64,
}

/// `scope` is an fps value, or `all` for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub scope: String,
    pub steps: u64,
    pub agent_wall_ms: f64,
    pub env_wall_ms: f64,
    pub simulated_ms: f64,
    pub agent_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub dir: PathBuf,
    pub frames: Vec<FramesRow>,
    pub resources: Vec<ResourcesRow>,
    pub utilization: Vec<UtilizationRow>,
    pub rewards_rows: usize,
    pub overhead: Vec<OverheadRow>,
}

/// One record per environment step. Multi-agent logs hold one record per
/// agent; the last one of a round carries the configuration the batch ran on.
pub fn per_step(records: &[EventLogRecord]) -> Vec<&EventLogRecord> {
    let mut out: Vec<&EventLogRecord> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(prev) if prev.episode == r.episode && prev.step == r.step => *prev = r,
            _ => out.push(r),
        }
    }
    out
}

fn by_fps<'a>(steps: &[&'a EventLogRecord]) -> BTreeMap<u32, Vec<&'a EventLogRecord>> {
    let mut m: BTreeMap<u32, Vec<&EventLogRecord>> = BTreeMap::new();
    for r in steps {
        m.entry(r.fps).or_default().push(r);
    }
    m
}

fn mean_of<'a>(rs: &[&'a EventLogRecord], f: impl Fn(&'a EventLogRecord) -> f64) -> f64 {
    mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap_or(f64::NAN)
}

pub fn frames_rows(steps: &[&EventLogRecord]) -> Vec<FramesRow> {
    by_fps(steps)
        .into_iter()
        .map(|(fps, rs)| {
            let times: Vec<f64> = rs.iter().map(|r| r.processing_time_ms).collect();
            FramesRow {
                fps,
                frames_per_batch: u64::from(rs[0].partitions) * u64::from(rs[0].frames_per_partition),
                batches: rs.len() as u64,
                mean_processing_time_ms: mean(&times).unwrap_or(f64::NAN),
                min_processing_time_ms: times.iter().copied().fold(f64::INFINITY, f64::min),
                max_processing_time_ms: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub fn resources_rows(steps: &[&EventLogRecord]) -> Vec<ResourcesRow> {
    let tail = ((steps.len() as f64 * PLATEAU_TAIL).ceil() as usize).max(1).min(steps.len());
    by_fps(&steps[steps.len() - tail..])
        .into_iter()
        .map(|(fps, rs)| ResourcesRow {
            fps,
            samples: rs.len() as u64,
            mean_cores: mean_of(&rs, |r| f64::from(r.cores)),
            mean_memory_mb: mean_of(&rs, |r| f64::from(r.memory_mb)),
            mean_instances: mean_of(&rs, |r| f64::from(r.instances)),
        })
        .collect()
}

pub fn utilization_rows(steps: &[&EventLogRecord]) -> Vec<UtilizationRow> {
    by_fps(steps)
        .into_iter()
        .map(|(fps, rs)| UtilizationRow {
            fps,
            samples: rs.len() as u64,
            mean_cpu_util_pct: mean_of(&rs, |r| r.cpu_util_pct),
            mean_mem_util_pct: mean_of(&rs, |r| r.mem_util_pct),
            mean_contention: mean_of(&rs, |r| r.contention),
        })
        .collect()
}

fn overhead_row(scope: String, ts: &[&TimingRecord]) -> OverheadRow {
    let agent: f64 = ts.iter().map(|t| t.agent_wall_ms).sum();
    let env: f64 = ts.iter().map(|t| t.env_wall_ms).sum();
    let sim: f64 = ts.iter().map(|t| t.simulated_ms).sum();
    OverheadRow {
        scope,
        steps: ts.len() as u64,
        agent_wall_ms: agent,
        env_wall_ms: env,
        simulated_ms: sim,
        agent_fraction: agent / (agent + sim),
    }
}

/// Agent compute against the time the pipeline itself would have spent on the batches.
pub fn overhead_rows(timing: &[TimingRecord]) -> Vec<OverheadRow> {
    let mut groups: BTreeMap<u32, Vec<&TimingRecord>> = BTreeMap::new();
    for t in timing {
        groups.entry(t.fps).or_default().push(t);
    }
    let mut rows: Vec<OverheadRow> = groups
        .into_iter()
        .map(|(fps, ts)| overhead_row(fps.to_string(), &ts))
        .collect();
    rows.push(overhead_row("all".into(), &timing.iter().collect::<Vec<_>>()));
    rows
}

pub fn read_timing(path: &Path) -> Result<Vec<TimingRecord>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| {
            CliError::Parse { path: path.display().to_string(), line: i + 1, message: e.to_string() }
        })?;
        out.push(t);
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads `run_dir`'s logs and writes the five tables to `out` (default `run_dir/report`).
pub fn cmd_report(run_dir: &Path, out: Option<&Path>) -> Result<Report, CliError> {
    let log = read_log(&run_dir.join(EVENTS_FILE))?;
    if log.records.is_empty() {
        return Err(CliError::NoData(format!("{} holds no step records", run_dir.join(EVENTS_FILE).display())));
    }
    let timing = read_timing(&run_dir.join(TIMING_FILE))?;
    let dir = out.map_or_else(|| run_dir.join(REPORT_DIR), Path::to_path_buf);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let steps = per_step(&log.records);
    let frames = frames_rows(&steps);
    let resources = resources_rows(&steps);
    let utilization = utilization_rows(&steps);
    let overhead = overhead_rows(&timing);

    let mut series = RewardSeries::new();
    let rewards: Vec<_> = steps.iter().map(|r| series.push(r.episode, r.reward)).collect();

    write_csv(&dir.join(FRAMES_FILE), &frames)?;
    write_csv(&dir.join(RESOURCES_FILE), &resources)?;
    write_csv(&dir.join(UTILIZATION_FILE), &utilization)?;
    write_csv(&dir.join(REWARDS_FILE), &rewards)?;
    write_csv(&dir.join(OVERHEAD_FILE), &overhead)?;
    Ok(Report { dir, frames, resources, utilization, rewards_rows: rewards.len(), overhead })
}
