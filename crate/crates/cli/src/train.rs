//! `train`: run episodes, log every step, checkpoint periodically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sspe_core::dqn::{load_checkpoint, pretrain_from_trace, save_checkpoint, DqnAgent, Transition};
use sspe_core::env::FpsSource;
use sspe_core::madrl::Coordinator;
use sspe_core::seed;
use sspe_core::telemetry::{read_log, EventLogRecord, EventLogWriter, LogHeader, LOG_SCHEMA_VERSION};

use crate::config::{FpsSchedule, RunConfig};
use crate::error::CliError;
use crate::runtime::{agent_specs, build_env, build_world};
use crate::stats::{head_tail_means, plateau_statistic, RewardRow, RewardSeries};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const REWARDS_FILE: &str = "rewards.csv";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_FILE: &str = "config.json";

/// Wall-clock cost of one step. Kept out of events.jsonl so the event log
/// stays byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub episode: u64,
    pub step: u64,
    pub fps: u32,
    /// Action selection plus learning update.
    pub agent_wall_ms: f64,
    /// Simulator compute for the step.
    pub env_wall_ms: f64,
    /// Simulated batch time the step stands for.
    pub simulated_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub episodes: u64,
    pub steps: u64,
    pub mean_reward_first_1000: f64,
    pub mean_reward_last_1000: f64,
    pub plateau: f64,
}

/// Files a run writes, opened up front.
struct RunFiles {
    dir: PathBuf,
    events: EventLogWriter,
    rewards: csv::Writer<File>,
    timing: BufWriter<File>,
    series: RewardSeries,
    rewards_seen: Vec<f64>,
    running: Vec<f64>,
}

impl RunFiles {
    fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.out_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let config_path = dir.join(CONFIG_FILE);
        std::fs::write(&config_path, cfg.to_json_pretty()).map_err(|e| CliError::io(&config_path, e))?;
        let header = LogHeader {
            schema_version: LOG_SCHEMA_VERSION,
            run_config_hash: cfg.hash(),
        };
        let events = EventLogWriter::create(&dir.join(EVENTS_FILE), Some(&header))?;
        let rewards = csv::Writer::from_path(dir.join(REWARDS_FILE))?;
        let timing_path = dir.join(TIMING_FILE);
        let timing = BufWriter::new(File::create(&timing_path).map_err(|e| CliError::io(&timing_path, e))?);
        Ok(Self {
            dir,
            events,
            rewards,
            timing,
            series: RewardSeries::new(),
            rewards_seen: Vec::new(),
            running: Vec::new(),
        })
    }

    fn reward(&mut self, episode: u64, reward: f64) -> Result<(), CliError> {
        let row: RewardRow = self.series.push(episode, reward);
        self.rewards_seen.push(reward);
        self.running.push(row.running_avg_1000);
        self.rewards.serialize(row)?;
        Ok(())
    }

    fn timing(&mut self, t: &TimingRecord) -> Result<(), CliError> {
        let line = serde_json::to_string(t)?;
        writeln!(self.timing, "{line}").map_err(|e| CliError::io(&self.dir.join(TIMING_FILE), e))
    }

    fn finish(mut self, episodes: u64) -> Result<TrainSummary, CliError> {
        self.events.flush()?;
        self.rewards.flush().map_err(|e| CliError::io(&self.dir.join(REWARDS_FILE), e))?;
        self.timing.flush().map_err(|e| CliError::io(&self.dir.join(TIMING_FILE), e))?;
        let (first, last) = head_tail_means(&self.rewards_seen).unwrap_or((0.0, 0.0));
        Ok(TrainSummary {
            run_dir: self.dir,
            episodes,
            steps: self.rewards_seen.len() as u64,
            mean_reward_first_1000: first,
            mean_reward_last_1000: last,
            plateau: plateau_statistic(&self.running).unwrap_or(f64::NAN),
        })
    }
}

/// Frame rate for each training episode. `None` leaves the draw to the environment.
pub struct FpsPlan {
    range: Option<(u32, u32)>,
    strata: u32,
    rng: ChaCha8Rng,
    pending: Vec<u32>,
}

impl FpsPlan {
    pub fn new(cfg: &RunConfig) -> Self {
        let range = match (cfg.training.fps_schedule, cfg.workload.fps) {
            (FpsSchedule::Stratified, FpsSource::Range { min, max }) => Some((min, max)),
            _ => None,
        };
        Self {
            range,
            strata: cfg.training.stratum_block,
            rng: seed::rng(cfg.seed, seed::stream::SCHEDULE),
            pending: Vec::new(),
        }
    }

    pub fn next_fps(&mut self) -> Option<u32> {
        let (min, max) = self.range?;
        if self.pending.is_empty() {
            let width = f64::from(max - min + 1) / f64::from(self.strata);
            let mut block: Vec<u32> = (0..self.strata)
                .map(|k| {
                    let x = (f64::from(k) + self.rng.random::<f64>()) * width;
                    (min + x as u32).min(max)
                })
                .collect();
            block.shuffle(&mut self.rng);
            // popped from the back
            block.reverse();
            self.pending = block;
        }
        self.pending.pop()
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Train per `cfg`, optionally starting from `resume`.
pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainSummary, CliError> {
    cfg.validate()?;
    if cfg.is_multi_agent() {
        if resume.is_some() {
            log::warn!("--checkpoint is ignored for multi-agent runs");
        }
        train_multi(cfg)
    } else {
        train_single(cfg, resume)
    }
}

fn train_single(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainSummary, CliError> {
    let mut env = build_env(cfg)?;
    let mut agent = match resume {
        None => DqnAgent::new(env.obs_dim(), env.n_actions(), cfg.learner.clone(), cfg.seed)?,
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            ckpt.check_dims(env.obs_dim(), env.n_actions())?;
            let mut h = cfg.learner.clone();
            h.epsilon = ckpt.hyperparams.epsilon;
            log::info!("resuming from {} at epsilon {}", path.display(), h.epsilon);
            DqnAgent::with_network(ckpt.network, h, cfg.seed, 0)?
        }
    };
    if let Some(trace) = &cfg.training.pretrain_trace {
        let log = read_log(trace)?;
        let records: Vec<EventLogRecord> = log.records.into_iter().filter(|r| r.agent_role.is_none()).collect();
        pretrain_from_trace(&mut agent, &records, cfg.training.pretrain_epochs)?;
    }

    let mut files = RunFiles::create(cfg)?;
    let budget = cfg.training.step_budget.unwrap_or(u64::MAX);
    let ckpt_path = files.dir.join(CHECKPOINT_FILE);
    let mut steps = 0u64;
    let mut episodes = 0u64;
    let mut plan = FpsPlan::new(cfg);
    'episodes: for ep in 0..cfg.episodes() {
        let mut obs = env.reset(plan.next_fps())?;
        episodes += 1;
        loop {
            let t0 = Instant::now();
            let action = agent.act(&obs.0)?;
            let mut agent_ms = ms_since(t0);

            let t1 = Instant::now();
            let out = env.step(action)?;
            let env_ms = ms_since(t1);

            let epsilon = agent.epsilon();
            let t2 = Instant::now();
            let loss = agent.observe(Transition {
                state: obs.0,
                action,
                reward: out.reward,
                next_state: out.observation.0.clone(),
                done: out.done,
            })?;
            agent_ms += ms_since(t2);

            let mut record = out.record;
            record.epsilon = epsilon;
            record.loss = loss;
            files.events.append(&record)?;
            files.reward(record.episode, out.reward)?;
            files.timing(&TimingRecord {
                episode: record.episode,
                step: record.step,
                fps: record.fps,
                agent_wall_ms: agent_ms,
                env_wall_ms: env_ms,
                simulated_ms: out.effective_time_ms,
            })?;
            steps += 1;
            obs = out.observation;
            if out.done {
                agent.end_episode();
            }
            if steps >= budget {
                break 'episodes;
            }
            if out.done {
                break;
            }
        }
        if (ep + 1) % cfg.training.checkpoint_every == 0 {
            save_checkpoint(agent.network(), agent.hyperparams(), &ckpt_path)?;
        }
    }
    save_checkpoint(agent.network(), agent.hyperparams(), &ckpt_path)?;
    let summary = files.finish(episodes)?;
    log::info!("trained {} steps over {} episodes", summary.steps, summary.episodes);
    Ok(summary)
}

pub fn role_checkpoint_file(role: &str) -> String {
    format!("checkpoint_{role}.json")
}

fn train_multi(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let world = build_world(cfg)?;
    let specs = agent_specs(cfg, &world);
    let mut coord = Coordinator::new(world, specs, &cfg.learner, cfg.seed, cfg.madrl)?;
    let mut files = RunFiles::create(cfg)?;
    let budget = cfg.training.step_budget.unwrap_or(u64::MAX);
    let save_all = |coord: &Coordinator, dir: &Path| -> Result<(), CliError> {
        for a in coord.agents() {
            let path = dir.join(role_checkpoint_file(a.spec.role.as_str()));
            save_checkpoint(a.learner.network(), a.learner.hyperparams(), &path)?;
        }
        Ok(())
    };
    let mut steps = 0u64;
    let mut episodes = 0u64;
    let mut plan = FpsPlan::new(cfg);
    'episodes: for ep in 0..cfg.episodes() {
        coord.reset(plan.next_fps())?;
        episodes += 1;
        loop {
            let t0 = Instant::now();
            let round = coord.coordinate_step()?;
            // the simulator share of a round is negligible next to the learners
            let agent_ms = ms_since(t0);
            for r in &round.records {
                files.events.append(r)?;
            }
            let first = &round.records[0];
            files.reward(first.episode, round.reward)?;
            files.timing(&TimingRecord {
                episode: first.episode,
                step: first.step,
                fps: first.fps,
                agent_wall_ms: agent_ms,
                env_wall_ms: 0.0,
                simulated_ms: round.step.outcome.effective_time_ms,
            })?;
            steps += 1;
            if steps >= budget {
                break 'episodes;
            }
            if round.done {
                break;
            }
        }
        if (ep + 1) % cfg.training.checkpoint_every == 0 {
            save_all(&coord, &files.dir)?;
        }
    }
    save_all(&coord, &files.dir)?;
    files.finish(episodes)
}
