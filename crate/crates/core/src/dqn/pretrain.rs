//! Offline pretraining from a recorded event trace.

use super::agent::DqnAgent;
use super::replay::Transition;
use super::DqnError;
use crate::telemetry::EventLogRecord;

/// Rebuild the transition a record describes. `index` is reported in errors.
pub fn transition_from_record(
    index: usize,
    rec: &EventLogRecord,
    obs_dim: usize,
    n_actions: usize,
) -> Result<Transition, DqnError> {
    let fail = |message: String| DqnError::Parse { index, message };
    if rec.state.len() != obs_dim {
        return Err(fail(format!(
            "state has {} features, expected {obs_dim}",
            rec.state.len()
        )));
    }
    if rec.next_state.len() != obs_dim {
        return Err(fail(format!(
            "next_state has {} features, expected {obs_dim}",
            rec.next_state.len()
        )));
    }
    let action = rec.action_index as usize;
    if action >= n_actions {
        return Err(fail(format!("action_index {action} outside {n_actions} actions")));
    }
    if !rec.reward.is_finite() || rec.state.iter().chain(&rec.next_state).any(|x| !x.is_finite()) {
        return Err(fail("non-finite reward or observation".into()));
    }
    Ok(Transition {
        state: rec.state.clone(),
        action,
        reward: rec.reward,
        next_state: rec.next_state.clone(),
        done: rec.done,
    })
}

/// Seed the agent's replay buffer with the trace and run `epochs` passes of
/// minibatch updates, each pass being `ceil(len / batch_size)` updates.
/// Returns the number of epochs trained (0 for an empty trace).
pub fn pretrain_from_trace(
    agent: &mut DqnAgent,
    trace: &[EventLogRecord],
    epochs: usize,
) -> Result<usize, DqnError> {
    if trace.is_empty() {
        return Ok(0);
    }
    let (obs_dim, n_actions) = (agent.network().input_dim(), agent.network().output_dim());
    let transitions = trace
        .iter()
        .enumerate()
        .map(|(i, r)| transition_from_record(i, r, obs_dim, n_actions))
        .collect::<Result<Vec<_>, _>>()?;
    let n = transitions.len();
    for t in transitions {
        agent.remember(t);
    }
    let per_epoch = n.div_ceil(agent.hyperparams().batch_size);
    for _ in 0..epochs {
        for _ in 0..per_epoch {
            agent.update()?;
        }
    }
    agent.sync_target();
    log::info!("pretrained on {n} records for {epochs} epochs");
    Ok(epochs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::Hyperparams;
    use serde_json::Map;

    fn record(i: usize) -> EventLogRecord {
        EventLogRecord {
            ts: i as f64,
            episode: 0,
            step: i as u64,
            fps: 30,
            partitions: 5,
            frames_per_partition: 30,
            cores: 2,
            memory_mb: 700,
            instances: 6,
            processing_time_ms: 400.0,
            reward: 2.5e-6,
            epsilon: 1.0,
            loss: None,
            cpu_util_pct: 50.0,
            mem_util_pct: 20.0,
            contention: 1.0,
            agent_role: None,
            action_index: (i % 4) as u32,
            applied: true,
            reconfig_delay_ms: 0.0,
            throughput_tps: 375.0,
            state: vec![0.1 * i as f64, 0.5, 0.2],
            next_state: vec![0.1, 0.5, 0.3],
            done: i % 10 == 9,
            extra: Map::new(),
        }
    }

    fn agent() -> DqnAgent {
        let h = Hyperparams {
            hidden_layers: vec![8],
            batch_size: 4,
            ..Default::default()
        };
        DqnAgent::new(3, 4, h, 5).unwrap()
    }

    #[test]
    fn empty_trace_is_noop() {
        let mut a = agent();
        let before = a.network().clone();
        assert_eq!(pretrain_from_trace(&mut a, &[], 5).unwrap(), 0);
        assert_eq!(a.network(), &before);
        assert!(a.replay().is_empty());
    }

    #[test]
    fn fills_replay_and_trains() {
        let mut a = agent();
        let before = a.network().clone();
        let trace: Vec<_> = (0..25).map(record).collect();
        assert_eq!(pretrain_from_trace(&mut a, &trace, 3).unwrap(), 3);
        assert_eq!(a.replay().len(), 25);
        assert_ne!(a.network(), &before);
        assert_eq!(a.network(), a.target_network());
    }

    #[test]
    fn malformed_record_reports_index() {
        let mut a = agent();
        let mut trace: Vec<_> = (0..5).map(record).collect();
        trace[3].state.pop();
        match pretrain_from_trace(&mut a, &trace, 1) {
            Err(DqnError::Parse { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
        trace[3] = record(3);
        trace[2].action_index = 4;
        assert!(matches!(
            pretrain_from_trace(&mut a, &trace, 1),
            Err(DqnError::Parse { index: 2, .. })
        ));
    }
}
