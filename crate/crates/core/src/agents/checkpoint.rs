//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FSCB"
//! 4       4     u32 format version
//! 8       4     u32 metadata length M
//! 12      M     metadata, UTF-8 JSON (CheckpointMeta)
//! 12+M    4*P   P raw f32 parameters, P = metadata.num_params
//! ```
//!
//! The file must end exactly after the payload.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Architecture, QNetwork};
use super::policy::{OtherPlayWrapper, Policy, QPolicy};
use super::rules::{Convention, RuleBasedAgent, RuleParams};
use crate::engine::{GameConfig, ENCODING_VERSION};

pub const MAGIC: &[u8; 4] = b"FSCB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "IQL")]
    Iql,
    #[serde(rename = "VDN")]
    Vdn,
    #[serde(rename = "IQL+OP")]
    IqlOp,
    #[serde(rename = "VDN+OP")]
    VdnOp,
    #[serde(rename = "RULE")]
    Rule,
}

impl Algorithm {
    pub fn from_flags(vdn: bool, other_play: bool) -> Self {
        match (vdn, other_play) {
            (false, false) => Algorithm::Iql,
            (true, false) => Algorithm::Vdn,
            (false, true) => Algorithm::IqlOp,
            (true, true) => Algorithm::VdnOp,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Iql => "IQL",
            Algorithm::Vdn => "VDN",
            Algorithm::IqlOp => "IQL+OP",
            Algorithm::VdnOp => "VDN+OP",
            Algorithm::Rule => "RULE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub convention: Convention,
    pub params: RuleParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub algorithm: Algorithm,
    pub game: GameConfig,
    pub encoding_version: u32,
    pub config_hash: String,
    pub architecture: Option<Architecture>,
    pub rule: Option<RuleSpec>,
    pub num_params: usize,
    pub training_seed: u64,
    pub train_steps: u64,
    pub self_play_score: Option<f64>,
    /// Free-form record of how the checkpoint was produced.
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Vec<f32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("malformed checkpoint metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("parameter payload has {found} bytes, expected {expected}")]
    PayloadLength { expected: usize, found: usize },
    #[error("game configuration hash {found} does not match expected {expected}")]
    ConfigHash { expected: String, found: String },
    #[error("checkpoint metadata is inconsistent: {0}")]
    Inconsistent(String),
}

/// Stable fingerprint of the game rules and observation encoding an agent was
/// trained against. The deal seed is excluded.
pub fn config_hash(config: &GameConfig) -> String {
    let canonical = GameConfig { seed: 0, ..config.clone() };
    let json = serde_json::to_string(&canonical).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hasher.update(ENCODING_VERSION.to_le_bytes());
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn for_network(
        algorithm: Algorithm,
        game: &GameConfig,
        architecture: Architecture,
        params: Vec<f32>,
        training_seed: u64,
        train_steps: u64,
        self_play_score: Option<f64>,
    ) -> Self {
        Self {
            meta: CheckpointMeta {
                algorithm,
                game: game.clone(),
                encoding_version: ENCODING_VERSION,
                config_hash: config_hash(game),
                architecture: Some(architecture),
                rule: None,
                num_params: params.len(),
                training_seed,
                train_steps,
                self_play_score,
                provenance: None,
            },
            params,
        }
    }

    pub fn for_rule(game: &GameConfig, convention: Convention, params: RuleParams) -> Self {
        Self {
            meta: CheckpointMeta {
                algorithm: Algorithm::Rule,
                game: game.clone(),
                encoding_version: ENCODING_VERSION,
                config_hash: config_hash(game),
                architecture: None,
                rule: Some(RuleSpec { convention, params }),
                num_params: 0,
                training_seed: 0,
                train_steps: 0,
                self_play_score: None,
                provenance: None,
            },
            params: Vec::new(),
        }
    }

    pub fn game(&self) -> &GameConfig {
        &self.meta.game
    }

    /// The playable policy; Other-Play agents are wrapped in evaluation mode.
    pub fn policy(&self) -> Arc<dyn Policy> {
        if let Some(rule) = &self.meta.rule {
            return Arc::new(RuleBasedAgent::new(rule.convention, rule.params.clone(), &self.meta.game));
        }
        let arch = self.meta.architecture.expect("network checkpoint has an architecture");
        let q = QPolicy::from_arch(arch, &self.meta.game, self.params.clone());
        match self.meta.algorithm {
            Algorithm::IqlOp | Algorithm::VdnOp => {
                Arc::new(OtherPlayWrapper::new(q, self.meta.game.num_colors, false))
            }
            _ => Arc::new(q),
        }
    }

    /// Q-network view of a network checkpoint.
    pub fn q_policy(&self) -> Option<QPolicy> {
        let arch = self.meta.architecture?;
        Some(QPolicy::from_arch(arch, &self.meta.game, self.params.clone()))
    }

    fn validate(&self) -> Result<(), CheckpointError> {
        let expected_hash = config_hash(&self.meta.game);
        if self.meta.config_hash != expected_hash || self.meta.encoding_version != ENCODING_VERSION {
            return Err(CheckpointError::ConfigHash { expected: expected_hash, found: self.meta.config_hash.clone() });
        }
        let expected_params = match (&self.meta.architecture, &self.meta.rule) {
            (Some(arch), None) => QNetwork::new(*arch, &self.meta.game).num_params(),
            (None, Some(_)) => 0,
            _ => return Err(CheckpointError::Inconsistent("exactly one of architecture and rule must be set".into())),
        };
        if self.meta.num_params != expected_params || self.params.len() != expected_params {
            return Err(CheckpointError::PayloadLength {
                expected: expected_params * 4,
                found: self.params.len() * 4,
            });
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), CheckpointError> {
        self.validate()?;
        let meta = serde_json::to_vec(&self.meta)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;
        let mut payload = Vec::with_capacity(self.params.len() * 4);
        for p in &self.params {
            payload.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let header_u32 = |at: usize| -> Result<u32, CheckpointError> {
            let slice = bytes.get(at..at + 4).ok_or(CheckpointError::PayloadLength { expected: at + 4, found: bytes.len() })?;
            Ok(u32::from_le_bytes(slice.try_into().unwrap()))
        };
        let version = header_u32(4)?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version { found: version, expected: FORMAT_VERSION });
        }
        let meta_len = header_u32(8)? as usize;
        let meta_bytes = bytes.get(12..12 + meta_len).ok_or(CheckpointError::PayloadLength {
            expected: 12 + meta_len,
            found: bytes.len(),
        })?;
        let meta: CheckpointMeta = serde_json::from_slice(meta_bytes)?;
        let payload = &bytes[12 + meta_len..];
        if payload.len() != meta.num_params * 4 {
            return Err(CheckpointError::PayloadLength { expected: meta.num_params * 4, found: payload.len() });
        }
        let params = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let ckpt = Checkpoint { meta, params };
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Fails with a config-hash error unless the checkpoint was built for `config`'s rules.
    pub fn ensure_compatible(&self, config: &GameConfig) -> Result<(), CheckpointError> {
        let expected = config_hash(config);
        if self.meta.config_hash != expected {
            return Err(CheckpointError::ConfigHash { expected, found: self.meta.config_hash.clone() });
        }
        Ok(())
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    checkpoint.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
