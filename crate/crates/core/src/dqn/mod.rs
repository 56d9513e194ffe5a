//! Q-network learner: MLP with manual backprop, replay, epsilon-greedy policy,
//! offline pretraining, checkpoints and a finite-difference gradient check.

pub mod agent;
pub mod bandit;
pub mod checkpoint;
pub mod gradcheck;
pub mod network;
pub mod pretrain;
pub mod replay;

pub use agent::{bellman_target, decay_epsilon, select_action, train_step, DqnAgent, Hyperparams};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use gradcheck::{check_random_net, grad_check};
pub use network::{argmax, Gradients, Layer, QNetwork, RegressionSample};
pub use pretrain::{pretrain_from_trace, transition_from_record};
pub use replay::{ReplayBuffer, Transition};

#[derive(Debug, thiserror::Error)]
pub enum DqnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("checkpoint integrity error in `{field}`: {message}")]
    Integrity { field: String, message: String },
    #[error("trace record {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
