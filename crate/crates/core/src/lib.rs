//! Simulator, learner and multi-agent tuning framework for a serverless
//! stream-processing cluster.
//!
//! - [`sim`]: executor cost surface, cluster and operator topology model
//! - [`env`]: MDP wrapper with observation encoding, action codecs and rewards
//! - [`dqn`]: from-scratch Deep Q-Network with replay and gradient checking
//! - [`madrl`]: five specialised agents sharing one reward
//! - [`telemetry`]: metric store, configuration snapshots and the JSON-lines event log

pub mod dqn;
pub mod env;
pub mod madrl;
pub mod seed;
pub mod sim;
pub mod telemetry;
