//! Benchmark orchestration: agent pools, cross-play matrices, partner
//! selection, adaptation runs and hyper-parameter sweeps.

mod benchmark;
mod crossplay;
mod select;
mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{config_hash, Checkpoint, CheckpointError, Policy};
use crate::engine::{EngineError, GameConfig};
use crate::metrics::MetricsError;
use crate::training::TrainError;

pub use benchmark::{run_benchmark, BenchmarkSpec};
pub use crossplay::compute_crossplay;
pub use select::{select_partners, subset_diversity, PartnerSelection, SearchMode, EXHAUSTIVE_LIMIT};
pub use sweep::{run_hp_sweep, SweepGrid, SweepPanel, SweepPoint, SweepReport, SweepSeries};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("pool members disagree on the game: {0}")]
    ConfigMismatch(String),
    #[error("no feasible partner subset: {0}")]
    Infeasible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown agent id {0}")]
    UnknownAgent(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Where a pool member came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    pub architecture: Option<String>,
    pub seed: u64,
}

pub struct PoolEntry {
    pub id: String,
    pub checkpoint: Checkpoint,
    pub policy: Arc<dyn Policy>,
}

impl PoolEntry {
    pub fn provenance(&self) -> Provenance {
        let meta = &self.checkpoint.meta;
        Provenance {
            algorithm: match &meta.rule {
                Some(rule) => format!("RULE:{}", rule.convention.id()),
                None => meta.algorithm.tag().to_string(),
            },
            architecture: meta.architecture.map(|a| a.to_string()),
            seed: meta.training_seed,
        }
    }
}

/// Checkpoints that all play the same game.
pub struct AgentPool {
    config: GameConfig,
    entries: Vec<PoolEntry>,
}

impl AgentPool {
    pub fn new(members: Vec<(String, Checkpoint)>) -> Result<Self, ProtocolError> {
        let first = members.first().ok_or_else(|| ProtocolError::InvalidArgument("empty pool".into()))?;
        let config = first.1.game().clone();
        let hash = config_hash(&config);
        let mut entries = Vec::with_capacity(members.len());
        for (id, checkpoint) in members {
            if config_hash(checkpoint.game()) != hash {
                return Err(ProtocolError::ConfigMismatch(format!("{id} plays a different game than {}", first_id(&entries, &id))));
            }
            if entries.iter().any(|e: &PoolEntry| e.id == id) {
                return Err(ProtocolError::InvalidArgument(format!("duplicate agent id {id}")));
            }
            let policy = checkpoint.policy();
            entries.push(PoolEntry { id, checkpoint, policy });
        }
        Ok(Self { config, entries })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Result<&PoolEntry, ProtocolError> {
        self.entries.iter().find(|e| e.id == id).ok_or_else(|| ProtocolError::UnknownAgent(id.to_string()))
    }
}

fn first_id(entries: &[PoolEntry], fallback: &str) -> String {
    entries.first().map(|e| e.id.clone()).unwrap_or_else(|| fallback.to_string())
}

/// Applies `f` to every item on at most `workers` threads; results keep the
/// item order.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let done: Vec<Vec<(usize, R)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.unwrap()).collect()
}
