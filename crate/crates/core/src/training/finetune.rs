use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::selfplay::{run_loop, LoopSpec};
use super::{TrainConfig, TrainError};
use crate::agents::{config_hash, Checkpoint, Policy};

/// Evaluated score of the learner with its partner at one episode index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub episode: usize,
    pub score: f64,
    pub perfect_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationTrace {
    pub learner_id: String,
    pub partner_id: String,
    pub tconfig: TrainConfig,
    pub seed: u64,
    pub points: Vec<TracePoint>,
}

impl AdaptationTrace {
    pub fn episodes(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.episode).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.score).collect()
    }

    /// Writes `episode,score,perfect_rate` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path)?;
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<TracePoint>, TrainError> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        Ok(r.deserialize().collect::<Result<_, _>>()?)
    }
}

/// Fine-tunes `learner` against a frozen partner checkpoint.
pub fn finetune(
    learner: &Checkpoint,
    partner: &Checkpoint,
    tconfig: &TrainConfig,
    budget_episodes: usize,
    seed: u64,
) -> Result<AdaptationTrace, TrainError> {
    if config_hash(learner.game()) != config_hash(partner.game()) {
        return Err(TrainError::ConfigMismatch(format!(
            "learner plays {}, partner plays {}",
            config_hash(learner.game()),
            config_hash(partner.game())
        )));
    }
    let (trace, _) = finetune_with_partner(learner, partner.policy(), "partner", tconfig, budget_episodes, seed)?;
    Ok(trace)
}

/// Fine-tunes `learner` with independent Q-learning against `partner`, which
/// always acts greedily and is never updated. The learner's seat alternates
/// between games. Returns the trace and the adapted parameters.
pub fn finetune_with_partner(
    learner: &Checkpoint,
    partner: Arc<dyn Policy>,
    partner_id: &str,
    tconfig: &TrainConfig,
    budget_episodes: usize,
    seed: u64,
) -> Result<(AdaptationTrace, Vec<f32>), TrainError> {
    tconfig.validate()?;
    let arch = learner
        .meta
        .architecture
        .ok_or_else(|| TrainError::ConfigMismatch("the learner must be a network checkpoint".into()))?;
    let outcome = run_loop(LoopSpec {
        config: learner.game(),
        tconfig,
        arch,
        params: learner.params.clone(),
        partner: Some(partner),
        vdn: false,
        seed,
        episodes: budget_episodes,
    })?;
    let points = outcome
        .log
        .iter()
        .map(|r| TracePoint { episode: r.episode, score: r.score, perfect_rate: r.perfect_rate })
        .collect();
    let trace = AdaptationTrace {
        learner_id: format!("{}-seed{}", learner.meta.algorithm.tag(), learner.meta.training_seed),
        partner_id: partner_id.to_string(),
        tconfig: tconfig.clone(),
        seed,
        points,
    };
    Ok((trace, outcome.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Algorithm, Architecture, Convention, QNetwork, RuleParams};
    use crate::engine::GameConfig;
    use rand::SeedableRng;

    fn learner(config: &GameConfig) -> Checkpoint {
        let arch = Architecture { hidden_dim: 16, ..Architecture::default() };
        let params = QNetwork::new(arch, config).init_params(&mut rand_chacha::ChaCha8Rng::seed_from_u64(4));
        Checkpoint::for_network(Algorithm::Iql, config, arch, params, 4, 0, None)
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            replay_buffer_size: 20,
            num_threads: 1,
            num_games_per_thread: 2,
            eval_every: 6,
            eval_games: 4,
            burn_in_episodes: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_budget_is_zero_shot_only() {
        let config = GameConfig::small();
        let partner = Checkpoint::for_rule(&config, Convention::Grounded, RuleParams::default());
        let trace = finetune(&learner(&config), &partner, &tiny(), 0, 1).unwrap();
        assert_eq!(trace.episodes(), vec![0]);
    }

    #[test]
    fn partner_stays_frozen_and_indices_increase() {
        let config = GameConfig::small();
        let partner = learner(&config);
        let before = partner.params.clone();
        let trace = finetune(&learner(&config), &partner, &tiny(), 14, 2).unwrap();
        assert_eq!(partner.params, before);
        assert_eq!(trace.episodes(), vec![0, 6, 12, 14]);
    }

    #[test]
    fn mismatched_games_are_rejected() {
        let config = GameConfig::small();
        let partner = Checkpoint::for_rule(&GameConfig::default(), Convention::Grounded, RuleParams::default());
        assert!(matches!(finetune(&learner(&config), &partner, &tiny(), 4, 1), Err(TrainError::ConfigMismatch(_))));
    }

    #[test]
    fn trace_csv_round_trip() {
        let config = GameConfig::small();
        let partner = Checkpoint::for_rule(&config, Convention::Grounded, RuleParams::default());
        let trace = finetune(&learner(&config), &partner, &tiny(), 6, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("episode,score,perfect_rate\n"));
        assert_eq!(AdaptationTrace::read_points(&path).unwrap(), trace.points);
    }
}
