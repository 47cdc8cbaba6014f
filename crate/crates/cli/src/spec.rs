//! The run specification: one TOML document describing a whole experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fsc_core::agents::Architecture;
use fsc_core::metrics::{Aggregator, UpperBound};
use fsc_core::protocol::{SearchMode, SweepGrid};
use fsc_core::training::TrainConfig;
use fsc_core::GameConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A malformed or inconsistent run specification.
#[derive(Debug)]
pub struct SpecError(pub String);

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid run spec: {}", self.0)
    }
}

impl std::error::Error for SpecError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub schema_version: u32,
    pub seed: u64,
    /// Directory every artifact is written to.
    pub out_dir: PathBuf,
    pub game: GameConfig,
    pub train: TrainConfig,
    pub architecture: Architecture,
    pub pool: PoolSpec,
    pub crossplay: CrossplaySpec,
    pub select: SelectSpec,
    pub adapt: AdaptSpec,
    pub sweep: SweepGrid,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            out_dir: PathBuf::from("fsc-out"),
            game: GameConfig::small(),
            train: TrainConfig::default(),
            architecture: Architecture::default(),
            pool: PoolSpec::default(),
            crossplay: CrossplaySpec::default(),
            select: SelectSpec::default(),
            adapt: AdaptSpec::default(),
            sweep: SweepGrid::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSpec {
    pub agents: Vec<AgentRef>,
}

/// A pool member: a checkpoint path, or `rule:<convention>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRef {
    pub id: String,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossplaySpec {
    pub games_per_pair: usize,
    pub base_seed: u64,
    /// Concurrent cells.
    pub workers: usize,
}

impl Default for CrossplaySpec {
    fn default() -> Self {
        Self { games_per_pair: 200, base_seed: 1_000_000, workers: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectSpec {
    pub k: usize,
    pub strength_min: f64,
    pub diversity_target: f64,
    pub upper_bound: UpperBound,
    pub search: SearchMode,
}

impl Default for SelectSpec {
    fn default() -> Self {
        Self { k: 5, strength_min: 0.5, diversity_target: 0.5, upper_bound: UpperBound::SelfPlay, search: SearchMode::Auto }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSpec {
    pub learner: String,
    /// Partner ids; empty means the ids of `selection.json` in `out_dir`.
    pub partners: Vec<String>,
    pub budget: usize,
    pub seeds_per_pair: usize,
    pub base_seed: u64,
    pub upper_bound: UpperBound,
    pub aggregator: Aggregator,
    /// Concurrent fine-tuning runs.
    pub workers: usize,
}

impl Default for AdaptSpec {
    fn default() -> Self {
        Self {
            learner: String::new(),
            partners: Vec::new(),
            budget: 10_000,
            seeds_per_pair: 1,
            base_seed: 0,
            upper_bound: UpperBound::MaxScore,
            aggregator: Aggregator::Mean,
            workers: 1,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub replay_buffer_size: Option<usize>,
    pub num_threads: Option<usize>,
    pub num_games_per_thread: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Upper limit on concurrent workers anywhere in the run.
    pub max_workers: Option<usize>,
}

impl RunSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| SpecError(e.to_string()))?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading run spec {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Flags override file values, which override defaults.
    pub fn apply(&mut self, o: &Overrides) {
        let t = &mut self.train;
        if let Some(v) = o.lr {
            t.lr = v;
        }
        if let Some(v) = o.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = o.replay_buffer_size {
            t.replay_buffer_size = v;
        }
        if let Some(v) = o.num_threads {
            t.num_threads = v;
        }
        if let Some(v) = o.num_games_per_thread {
            t.num_games_per_thread = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
    }

    /// Worker counts after the global cap, which never changes results.
    pub fn capped(&self, workers: usize, cap: Option<usize>) -> usize {
        cap.map_or(workers, |c| workers.min(c.max(1))).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(SpecError(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        self.game.validate().map_err(|e| SpecError(e.to_string()))?;
        self.train.validate().map_err(|e| SpecError(e.to_string()))?;
        if self.architecture.num_hidden_layers == 0 || self.architecture.hidden_dim == 0 || self.architecture.history_len == 0 {
            bail!(SpecError("architecture sizes must be positive".into()));
        }
        Ok(())
    }

    /// The resolved spec as TOML, embedded in every artifact.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec serializes")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run spec serializes")
    }
}
