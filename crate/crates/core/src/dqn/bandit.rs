//! Two-context bandit: the context selects which of three actions pays 1.
//! A sanity problem for the learner, small enough to run in the test suite.

use rand::Rng;

use super::{DqnAgent, DqnError, Hyperparams, Transition};
use crate::seed;

pub const PAYING: [usize; 2] = [2, 0];

pub fn context(c: usize) -> Vec<f64> {
    if c == 0 {
        vec![1.0, 0.0]
    } else {
        vec![0.0, 1.0]
    }
}

pub fn bandit_hyperparams() -> Hyperparams {
    Hyperparams {
        hidden_layers: vec![16],
        epsilon_decay: 0.99,
        reward_scale: 1.0,
        ..Default::default()
    }
}

/// Train for `steps` one-step episodes and report whether the greedy policy
/// picks the paying action in both contexts.
pub fn solves_bandit(seed_value: u64, steps: usize) -> Result<bool, DqnError> {
    let mut agent = DqnAgent::new(2, 3, bandit_hyperparams(), seed_value)?;
    let mut env_rng = seed::rng(seed_value, seed::stream::ENV);
    for _ in 0..steps {
        let c = env_rng.random_range(0..2);
        let s = context(c);
        let a = agent.act(&s)?;
        let reward = if a == PAYING[c] { 1.0 } else { 0.0 };
        agent.observe(Transition {
            state: s.clone(),
            action: a,
            reward,
            next_state: s,
            done: true,
        })?;
        agent.end_episode();
    }
    Ok((0..2).all(|c| agent.greedy(&context(c)).map(|a| a == PAYING[c]).unwrap_or(false)))
}
