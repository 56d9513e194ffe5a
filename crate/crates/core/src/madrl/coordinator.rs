//! Round-robin coordination loop, heuristic baselines and log replay.

use serde::{Deserialize, Serialize};

use super::world::{World, WorldStep, TUNER_PARAMS};
use super::{partition_state, shared_reward, AgentRole, AgentSpec, MadrlError, DEFAULT_SLO_PENALTY};
use crate::dqn::{DqnAgent, Hyperparams, Transition};
use crate::env::{Observation, RewardSpec, SloSpec};
use crate::telemetry::{ConfigSnapshot, EventLogRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MadrlConfig {
    pub slo_penalty: f64,
}

impl Default for MadrlConfig {
    fn default() -> Self {
        Self {
            slo_penalty: DEFAULT_SLO_PENALTY,
        }
    }
}

impl MadrlConfig {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        if self.slo_penalty.is_finite() && self.slo_penalty >= 0.0 {
            Vec::new()
        } else {
            vec![("slo_penalty", format!("must be >= 0, got {}", self.slo_penalty))]
        }
    }
}

/// How agents pick actions in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    EpsilonGreedy,
    Greedy,
    Heuristic,
}

pub struct MadrlAgent {
    pub spec: AgentSpec,
    pub learner: DqnAgent,
}

/// Everything one coordination round produced.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub reward: f64,
    pub done: bool,
    pub step: WorldStep,
    /// One per agent, in round-robin order.
    pub transitions: Vec<Transition>,
    pub records: Vec<EventLogRecord>,
}

pub struct Coordinator {
    world: World,
    agents: Vec<MadrlAgent>,
    reward: RewardSpec,
    slo: SloSpec,
    cfg: MadrlConfig,
}

impl Coordinator {
    /// Agent `k` of `specs` gets the learner streams of index `k`.
    pub fn new(
        world: World,
        specs: Vec<AgentSpec>,
        h: &Hyperparams,
        seed: u64,
        cfg: MadrlConfig,
    ) -> Result<Self, MadrlError> {
        if specs.is_empty() {
            return Err(MadrlError::Structural("at least one agent is required".into()));
        }
        let dim = world.global_dim();
        let mut agents = Vec::with_capacity(specs.len());
        for (k, spec) in specs.into_iter().enumerate() {
            if !world.supports(spec.role) {
                return Err(MadrlError::Structural(format!(
                    "{} needs a topology in the run configuration",
                    spec.role
                )));
            }
            spec.validate(dim)?;
            let learner = DqnAgent::for_agent(
                spec.state_partition.len(),
                world.action_count(spec.role),
                h.clone(),
                seed,
                k as u64,
            )?;
            agents.push(MadrlAgent { spec, learner });
        }
        let env_cfg = world.env().config();
        Ok(Self {
            reward: env_cfg.reward,
            slo: env_cfg.slo,
            world,
            agents,
            cfg,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn agents(&self) -> &[MadrlAgent] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [MadrlAgent] {
        &mut self.agents
    }

    pub fn reset(&mut self, fps: Option<u32>) -> Result<Observation, MadrlError> {
        self.world.reset(fps)
    }

    /// One training round: epsilon-greedy actions, shared reward, one
    /// update per learner, and epsilon decay when the episode ends.
    pub fn coordinate_step(&mut self) -> Result<RoundOutcome, MadrlError> {
        self.step(Policy::EpsilonGreedy, true)
    }

    pub fn step(&mut self, policy: Policy, learn: bool) -> Result<RoundOutcome, MadrlError> {
        struct Decision {
            state: Observation,
            action: usize,
            applied: bool,
        }
        let mut decisions = Vec::with_capacity(self.agents.len());
        let mut exec_action = None;
        for agent in &mut self.agents {
            let role = agent.spec.role;
            let state = partition_state(&self.world.observe(), &agent.spec.state_partition)?;
            let action = match policy {
                Policy::EpsilonGreedy => agent.learner.act(&state.0)?,
                Policy::Greedy => agent.learner.greedy(&state.0)?,
                Policy::Heuristic => heuristic_action(role, &self.world),
            };
            let result = self.world.enact(role, action)?;
            if role == AgentRole::ResourceAllocator && exec_action.is_none() {
                exec_action = Some(action);
            }
            decisions.push(Decision {
                state,
                action,
                applied: result.applied,
            });
        }
        let exec_action =
            exec_action.unwrap_or_else(|| self.world.noop_action(AgentRole::ResourceAllocator));
        let seed = self.world.next_batch_seed();
        let step = self.world.finish_round(exec_action, seed)?;
        let reward = shared_reward(
            &step.metrics,
            step.outcome.effective_time_ms,
            step.outcome.cost_rate_norm,
            &self.reward,
            &self.slo,
            self.cfg.slo_penalty,
        )?;
        let done = step.outcome.done;
        let next_global = self.world.observe();

        let mut transitions = Vec::with_capacity(decisions.len());
        let mut records = Vec::with_capacity(decisions.len());
        for (agent, d) in self.agents.iter_mut().zip(decisions) {
            let role = agent.spec.role;
            let next_state = partition_state(&next_global, &agent.spec.state_partition)?;
            let stored_action = if d.applied {
                d.action
            } else {
                self.world.noop_action(role)
            };
            let transition = Transition {
                state: d.state.0,
                action: stored_action,
                reward,
                next_state: next_state.0,
                done,
            };
            let epsilon = agent.learner.epsilon();
            let loss = if learn {
                agent.learner.observe(transition.clone())?
            } else {
                None
            };
            let mut record = step.outcome.record.clone();
            record.agent_role = Some(role.as_str().to_string());
            record.action_index = d.action as u32;
            record.applied = d.applied;
            record.reward = reward;
            record.epsilon = epsilon;
            record.loss = loss;
            record.state = transition.state.clone();
            record.next_state = transition.next_state.clone();
            records.push(record);
            transitions.push(transition);
        }
        if done && learn {
            for agent in &mut self.agents {
                agent.learner.end_episode();
            }
        }
        Ok(RoundOutcome {
            reward,
            done,
            step,
            transitions,
            records,
        })
    }
}

/// Baseline actions: the scheduler co-locates communicating replicas, the
/// tuner walks back to the default parameter grid, every other role holds.
pub fn heuristic_action(role: AgentRole, world: &World) -> usize {
    match role {
        AgentRole::Scheduler => colocate_action(world).unwrap_or(0),
        AgentRole::SystemParameterTuner => {
            let current = world.tuner_values();
            for (p, param) in TUNER_PARAMS.iter().enumerate() {
                let idx = param
                    .grid
                    .iter()
                    .position(|&v| v == current[param.name])
                    .expect("tuner value on its grid");
                if idx > param.default_index {
                    return 1 + 2 * p;
                }
                if idx < param.default_index {
                    return 2 + 2 * p;
                }
            }
            0
        }
        _ => world.noop_action(role),
    }
}

/// Move a downstream replica that shares no VM with any upstream replica
/// onto a VM that hosts one, if such a move exists.
fn colocate_action(world: &World) -> Option<usize> {
    let t = world.topology()?;
    let cluster = world.cluster();
    let comps = t.topology.components();
    let load = t.placement.load(cluster.len());
    let max_vms = world.max_vms() as usize;
    for &b in t.topology.order() {
        let upstream_vms: Vec<usize> = t
            .topology
            .edges()
            .iter()
            .filter(|&&(_, to)| to == b)
            .flat_map(|&(a, _)| t.placement.vms_of(&comps[a].id).iter().copied())
            .collect();
        if upstream_vms.is_empty() {
            continue;
        }
        let replicas = t.placement.vms_of(&comps[b].id);
        let is_bad = |vm: usize| !upstream_vms.contains(&vm);
        if !replicas.iter().any(|&vm| is_bad(vm)) {
            continue;
        }
        let mut targets = upstream_vms.clone();
        targets.sort_unstable();
        targets.dedup();
        for target in targets {
            if load[target] >= cluster.vms[target].vcpus {
                continue;
            }
            // the enactor moves the last replica not already on the target
            if let Some(r) = replicas.iter().rposition(|&v| v != target) {
                if is_bad(replicas[r]) {
                    return Some(1 + b * max_vms + target);
                }
            }
        }
    }
    None
}

/// Re-enact a MADRL event log on a fresh world and return the final state.
/// Fails if an enactment's outcome differs from the recorded one.
pub fn replay_actions(world: &mut World, records: &[EventLogRecord]) -> Result<ConfigSnapshot, MadrlError> {
    world.reset_structure();
    let mut episode = None;
    let mut last_step = 0;
    for (index, r) in records.iter().enumerate() {
        let role = r
            .agent_role
            .as_deref()
            .and_then(AgentRole::parse)
            .ok_or_else(|| MadrlError::Replay {
                index,
                message: format!("missing or unknown agent_role {:?}", r.agent_role),
            })?;
        if episode != Some(r.episode) {
            world.reset_structure();
            episode = Some(r.episode);
        }
        let result = world.enact(role, r.action_index as usize)?;
        if result.applied != r.applied {
            return Err(MadrlError::Replay {
                index,
                message: format!("recorded applied={}, replay gave {}", r.applied, result.applied),
            });
        }
        last_step = r.step;
    }
    world.discard_pending();
    Ok(world.snapshot(last_step))
}
