//! Few-shot coordination benchmark for two-player Hanabi.
//!
//! The crate is split the same way the benchmark is run: a deterministic
//! [`engine`], playable [`agents`], desk-scale Q-learning in [`training`],
//! evaluation quantities in [`metrics`], and the [`protocol`] that ties pool
//! construction, partner selection and adaptation runs together.

pub mod agents;
pub mod engine;
pub mod metrics;
pub mod play;
pub mod protocol;
pub mod training;

pub use engine::{Action, GameConfig, GameState, Observation};
