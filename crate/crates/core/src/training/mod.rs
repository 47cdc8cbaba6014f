//! Desk-scale Q-learning: episode collection by parallel actors, replay,
//! double/dueling TD updates with independent or value-decomposed targets,
//! and fine-tuning against a frozen partner.

mod actor;
mod config;
mod finetune;
mod learner;
mod replay;
mod selfplay;

use thiserror::Error;

use crate::agents::CheckpointError;
use crate::engine::EngineError;

pub use actor::{collect_round, run_episode, track_window, ActorSetup, EpisodeSpec};
pub use config::TrainConfig;
pub use finetune::{finetune, finetune_with_partner, AdaptationTrace, TracePoint};
pub use learner::{
    build_batch, group_td_gradient, joint_q_vdn, td_loss, td_target, Adam, Learner, NextAgent, PreparedBatch,
};
pub use replay::{Episode, ReplayBuffer, SampleMode, SampledTransition, Track};
pub use selfplay::{
    evaluate_selfplay, run_selfplay_training, splitmix as splitmix_seed, train_selfplay, write_log_csv, LogRow,
    TrainOutcome, EVAL_SEED_BASE,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("replay buffer holds {have} transitions, {need} requested")]
    UnderfullBuffer { have: usize, need: usize },
    #[error("learner and partner disagree on the game: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
