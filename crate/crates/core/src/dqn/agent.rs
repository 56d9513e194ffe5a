use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{argmax, QNetwork, RegressionSample};
use super::replay::{ReplayBuffer, Transition};
use super::DqnError;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    /// Current exploration rate; starts at the initial value.
    pub epsilon: f64,
    pub epsilon_min: f64,
    /// Multiplier applied once per episode.
    pub epsilon_decay: f64,
    pub learning_rate: f64,
    pub max_episodes: u32,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub hidden_layers: Vec<usize>,
    pub target_sync_interval: u64,
    /// Rewards are multiplied by this before they enter the replay buffer.
    pub reward_scale: f64,
    /// No gradient updates until the buffer holds this many transitions.
    pub learning_starts: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon: 1.0,
            epsilon_min: 0.01,
            epsilon_decay: 0.995,
            learning_rate: 0.001,
            max_episodes: 500,
            replay_capacity: 10_000,
            batch_size: 32,
            hidden_layers: vec![64, 64],
            target_sync_interval: 200,
            reward_scale: 1.0e5,
            learning_starts: 32,
        }
    }
}

impl Hyperparams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(0.0..1.0).contains(&self.gamma) {
            out.push(("gamma", format!("must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= self.epsilon && self.epsilon <= 1.0) {
            out.push((
                "epsilon",
                format!(
                    "need 0 < epsilon_min ({}) <= epsilon ({}) <= 1",
                    self.epsilon_min, self.epsilon
                ),
            ));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            out.push(("epsilon_decay", format!("must be in (0, 1), got {}", self.epsilon_decay)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            out.push(("learning_rate", format!("must be >= 0, got {}", self.learning_rate)));
        }
        if self.max_episodes < 1 {
            out.push(("max_episodes", "must be >= 1".into()));
        }
        if self.replay_capacity < 1 {
            out.push(("replay_capacity", "must be >= 1".into()));
        }
        if self.batch_size < 1 || self.batch_size > self.replay_capacity {
            out.push((
                "batch_size",
                format!("must be in [1, replay_capacity = {}]", self.replay_capacity),
            ));
        }
        if self.hidden_layers.contains(&0) {
            out.push(("hidden_layers", "widths must be >= 1".into()));
        }
        if self.target_sync_interval < 1 {
            out.push(("target_sync_interval", "must be >= 1".into()));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            out.push(("reward_scale", format!("must be > 0, got {}", self.reward_scale)));
        }
        out
    }

    pub fn validate(&self) -> Result<(), DqnError> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((field, msg)) => Err(DqnError::Argument(format!("{field}: {msg}"))),
        }
    }

    pub fn layer_sizes(&self, obs_dim: usize, n_actions: usize) -> Vec<usize> {
        std::iter::once(obs_dim)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(n_actions))
            .collect()
    }
}

/// One per-episode decay: `max(epsilon_min, epsilon * epsilon_decay)`.
pub fn decay_epsilon(h: &Hyperparams) -> f64 {
    (h.epsilon * h.epsilon_decay).max(h.epsilon_min)
}

/// Uniform action with probability `epsilon`, else the greedy one.
///
/// Always consumes one uniform draw so the RNG stream does not depend on epsilon.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    state: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, DqnError> {
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        Ok(rng.random_range(0..net.output_dim()))
    } else {
        Ok(argmax(&net.forward(state)?))
    }
}

/// `r` if done, else `r + gamma * max_a' Q_target(s', a')`.
pub fn bellman_target(target_net: &QNetwork, t: &Transition, gamma: f64) -> Result<f64, DqnError> {
    if t.done {
        return Ok(t.reward);
    }
    let q = target_net.forward(&t.next_state)?;
    Ok(t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// One gradient-descent update of `net` toward Bellman targets from `target_net`.
/// Returns the loss before the update.
pub fn train_step(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    h: &Hyperparams,
) -> Result<f64, DqnError> {
    if batch.is_empty() {
        return Err(DqnError::Argument("empty batch".into()));
    }
    let targets = batch
        .iter()
        .map(|t| bellman_target(target_net, t, h.gamma))
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<_> = batch
        .iter()
        .zip(&targets)
        .map(|(t, &target)| RegressionSample {
            state: &t.state,
            action: t.action,
            target,
        })
        .collect();
    let (loss, grads) = net.loss_and_gradients(&samples)?;
    net.apply_gradients(&grads, h.learning_rate);
    Ok(loss)
}

/// Online learner: epsilon-greedy policy, replay buffer and target network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    online: QNetwork,
    target: QNetwork,
    replay: ReplayBuffer,
    h: Hyperparams,
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
    episodes: u64,
}

impl DqnAgent {
    /// Single learner; same streams as agent 0 of a multi-agent run.
    pub fn new(obs_dim: usize, n_actions: usize, h: Hyperparams, seed_value: u64) -> Result<Self, DqnError> {
        Self::for_agent(obs_dim, n_actions, h, seed_value, 0)
    }

    /// Learner `index` of a multi-agent run; weights and policy draws use
    /// streams derived from the run seed and the index.
    pub fn for_agent(
        obs_dim: usize,
        n_actions: usize,
        h: Hyperparams,
        seed_value: u64,
        index: u64,
    ) -> Result<Self, DqnError> {
        h.validate()?;
        let mut rng = seed::rng(seed::derive(seed_value, seed::stream::INIT), index);
        let online = QNetwork::new(&h.layer_sizes(obs_dim, n_actions), &mut rng)?;
        Self::with_network(online, h, seed_value, index)
    }

    pub fn with_network(online: QNetwork, h: Hyperparams, seed_value: u64, index: u64) -> Result<Self, DqnError> {
        h.validate()?;
        Ok(Self {
            target: online.clone(),
            online,
            replay: ReplayBuffer::new(h.replay_capacity),
            rng: seed::rng(seed_value, seed::stream::AGENT_BASE + index),
            h,
            steps: 0,
            updates: 0,
            episodes: 0,
        })
    }

    pub fn network(&self) -> &QNetwork {
        &self.online
    }

    pub fn target_network(&self) -> &QNetwork {
        &self.target
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.h.epsilon
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn act(&mut self, state: &[f64]) -> Result<usize, DqnError> {
        select_action(&self.online, state, self.h.epsilon, &mut self.rng)
    }

    pub fn greedy(&self, state: &[f64]) -> Result<usize, DqnError> {
        Ok(argmax(&self.online.forward(state)?))
    }

    /// Store a transition (reward scaled) and train if the buffer is warm.
    pub fn observe(&mut self, mut t: Transition) -> Result<Option<f64>, DqnError> {
        t.reward *= self.h.reward_scale;
        if !t.reward.is_finite() {
            return Err(DqnError::Argument("non-finite reward".into()));
        }
        self.replay.push(t);
        self.steps += 1;
        let loss = if self.replay.len() >= self.h.batch_size.max(self.h.learning_starts) {
            Some(self.update()?)
        } else {
            None
        };
        if self.steps.is_multiple_of(self.h.target_sync_interval) {
            self.sync_target();
        }
        Ok(loss)
    }

    /// Store a transition without training; rewards are scaled as in `observe`.
    pub fn remember(&mut self, mut t: Transition) {
        t.reward *= self.h.reward_scale;
        self.replay.push(t);
    }

    /// One minibatch update from replay.
    pub fn update(&mut self) -> Result<f64, DqnError> {
        let batch = self.replay.sample(self.h.batch_size, &mut self.rng);
        let loss = train_step(&mut self.online, &self.target, &batch, &self.h)?;
        self.updates += 1;
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    pub fn end_episode(&mut self) {
        self.episodes += 1;
        self.h.epsilon = decay_epsilon(&self.h);
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.h.epsilon = epsilon;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::network::Layer;
    use rand::SeedableRng;

    fn transition(reward: f64, next_state: Vec<f64>, done: bool) -> Transition {
        Transition {
            state: vec![1.0, 0.0],
            action: 0,
            reward,
            next_state,
            done,
        }
    }

    fn constant_net(q: [f64; 3]) -> QNetwork {
        QNetwork::from_layers(vec![Layer {
            inputs: 2,
            outputs: 3,
            weights: vec![0.0; 6],
            biases: q.to_vec(),
        }])
        .unwrap()
    }

    #[test]
    fn decay_examples() {
        let mut h = Hyperparams::default();
        assert_eq!(decay_epsilon(&h), 0.995);
        h.epsilon = 0.01;
        assert_eq!(decay_epsilon(&h), 0.01);
        let mut h = Hyperparams::default();
        for _ in 0..100 {
            h.epsilon = decay_epsilon(&h);
        }
        assert!((h.epsilon - 0.605_770).abs() < 1e-6);
    }

    #[test]
    fn greedy_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = constant_net([1.0, 3.0, 2.0]);
        assert_eq!(select_action(&net, &[0.0, 0.0], 0.0, &mut rng).unwrap(), 1);
        let tied = constant_net([5.0, 5.0, 5.0]);
        assert_eq!(select_action(&tied, &[0.0, 0.0], 0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        // 72 actions, 1e5 draws: chi-square with 71 dof, 99% critical value 102.82
        let net = QNetwork::zeros(&[1, 72]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0u32; 72];
        let n = 100_000;
        for _ in 0..n {
            counts[select_action(&net, &[0.0], 1.0, &mut rng).unwrap()] += 1;
        }
        let expected = n as f64 / 72.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (f64::from(c) - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 102.82, "chi2 = {chi2}");
    }

    #[test]
    fn bellman_targets() {
        let target = constant_net([2.0, -1.0, 0.5]);
        let h = Hyperparams::default();
        let terminal = transition(1.0, vec![0.0, 0.0], true);
        assert_eq!(bellman_target(&target, &terminal, 0.3).unwrap(), 1.0);
        let t = transition(0.5, vec![0.0, 0.0], false);
        let y = bellman_target(&target, &t, h.gamma).unwrap();
        assert!((y - 2.4).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = QNetwork::new(&[2, 4, 3], &mut rng).unwrap();
        let before = net.clone();
        let h = Hyperparams {
            learning_rate: 0.0,
            ..Default::default()
        };
        let t = transition(1.0, vec![0.5, 0.5], false);
        let loss = train_step(&mut net, &before, &[&t], &h).unwrap();
        assert!(loss.is_finite());
        assert_eq!(net, before);
    }

    #[test]
    fn train_step_reduces_loss_and_leaves_target_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = QNetwork::new(&[2, 8, 3], &mut rng).unwrap();
        let target = net.clone();
        let frozen = target.clone();
        let h = Hyperparams {
            learning_rate: 0.05,
            ..Default::default()
        };
        let t = transition(1.0, vec![0.0, 1.0], false);
        let first = train_step(&mut net, &target, &[&t], &h).unwrap();
        let second = train_step(&mut net, &target, &[&t], &h).unwrap();
        assert!(second < first);
        assert_eq!(target, frozen);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut net = QNetwork::zeros(&[2, 3]).unwrap();
        let target = net.clone();
        assert!(matches!(
            train_step(&mut net, &target, &[], &Hyperparams::default()),
            Err(DqnError::Argument(_))
        ));
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams::default().violations().is_empty());
        let bad = Hyperparams {
            gamma: 1.0,
            batch_size: 20_000,
            epsilon_decay: 1.0,
            ..Default::default()
        };
        let fields: Vec<_> = bad.violations().into_iter().map(|(f, _)| f).collect();
        assert_eq!(fields, vec!["gamma", "epsilon_decay", "batch_size"]);
    }

    #[test]
    fn agent_syncs_target_on_interval() {
        let h = Hyperparams {
            batch_size: 2,
            learning_starts: 2,
            target_sync_interval: 3,
            learning_rate: 0.1,
            hidden_layers: vec![4],
            ..Default::default()
        };
        let mut agent = DqnAgent::new(2, 3, h, 11).unwrap();
        for i in 0..3 {
            let loss = agent
                .observe(transition(1e-5, vec![0.0, 1.0], false))
                .unwrap();
            assert_eq!(loss.is_some(), i >= 1);
            if i == 1 {
                assert_ne!(agent.network(), agent.target_network());
            }
        }
        assert_eq!(agent.network(), agent.target_network());
    }
}
