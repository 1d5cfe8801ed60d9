//! Deep Q-learning: the network, its optimizer, replay memory, checkpoints
//! and the multi-agent training loop.

mod checkpoint;
mod network;
mod replay;
mod rmsprop;
mod trainer;

use thiserror::Error;

pub use checkpoint::{load_network, read_network, save_network, write_network};
pub use network::{Dense, Gradients, QNetwork};
pub use replay::{Minibatch, ReplayMemory, Transition};
pub use rmsprop::{rmsprop_step, RmsProp};
pub use trainer::{td_target, train, Agent, TrainConfig, TrainOutcome};

use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("invalid layer sizes {0:?}")]
    BadArchitecture(Vec<usize>),
    #[error("input has {got} features, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("minibatch is empty")]
    EmptyBatch,
    #[error("batch shape mismatch: {states} states, {actions} actions, {targets} targets")]
    BatchShape {
        states: usize,
        actions: usize,
        targets: usize,
    },
    #[error("action {action} out of range ({num_actions} actions)")]
    ActionOutOfRange { action: usize, num_actions: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
}
