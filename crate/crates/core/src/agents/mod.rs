//! Playable agents: the policy abstraction, convention-based rule agents,
//! Q-network policies and the checkpoint container.

mod checkpoint;
pub mod network;
mod policy;
pub mod rules;

pub use checkpoint::{
    config_hash, load_checkpoint, save_checkpoint, Algorithm, Checkpoint, CheckpointError, CheckpointMeta,
    FORMAT_VERSION, MAGIC,
};
pub use network::{enumerate_architectures, masked_argmax, Architecture, Cell, QNetwork};
pub use policy::{history_input, relabel_history, write_window, OtherPlayWrapper, Policy, QPolicy};
pub use rules::{make_rule_agent, Convention, HintPriority, RuleBasedAgent, RuleParams};
