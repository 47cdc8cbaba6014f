use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actor::{collect_round, ActorSetup, EpisodeSpec};
use super::learner::Learner;
use super::replay::{ReplayBuffer, SampleMode};
use super::{TrainConfig, TrainError};
use crate::agents::{Algorithm, Architecture, Checkpoint, Policy, QNetwork, QPolicy};
use crate::engine::GameConfig;
use crate::play::play_game;

/// First deal used by evaluation games; every evaluation reuses the same deals.
pub const EVAL_SEED_BASE: u64 = 0x00e7_a15e_ed00_0000;

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: usize,
    pub step: u64,
    /// Mean loss of the gradient steps since the previous row.
    pub loss: Option<f64>,
    pub score: f64,
    pub perfect_rate: f64,
}

pub struct TrainOutcome {
    pub params: Vec<f32>,
    pub steps: u64,
    pub log: Vec<LogRow>,
    /// Distinct actor ids that produced stored episodes.
    pub worker_ids: Vec<usize>,
}

/// Greedy mean score and perfect rate of `seats` over `games` deals, with the
/// two policies swapping seats every game.
pub(crate) fn evaluate_alternating(
    config: &GameConfig,
    a: &dyn Policy,
    b: &dyn Policy,
    games: usize,
) -> Result<(f64, f64), TrainError> {
    let mut total = 0.0;
    let mut perfect = 0usize;
    for g in 0..games {
        let seed = EVAL_SEED_BASE.wrapping_add(g as u64);
        let seats: [&dyn Policy; 2] = if g % 2 == 0 { [a, b] } else { [b, a] };
        let score = play_game(config, seed, seats, 0.0)?.score;
        total += score as f64;
        perfect += usize::from(score == config.max_score());
    }
    Ok((total / games as f64, perfect as f64 / games as f64))
}

/// Greedy self-play mean score and perfect rate of a parameter vector.
pub fn evaluate_selfplay(
    config: &GameConfig,
    arch: Architecture,
    params: &[f32],
    games: usize,
) -> Result<(f64, f64), TrainError> {
    let policy = QPolicy::from_arch(arch, config, params.to_vec());
    evaluate_alternating(config, &policy, &policy, games)
}

/// Shared driver of self-play training and fine-tuning.
pub(crate) struct LoopSpec<'a> {
    pub config: &'a GameConfig,
    pub tconfig: &'a TrainConfig,
    pub arch: Architecture,
    pub params: Vec<f32>,
    pub partner: Option<Arc<dyn Policy>>,
    pub vdn: bool,
    pub seed: u64,
    pub episodes: usize,
}

pub(crate) fn run_loop(spec: LoopSpec) -> Result<TrainOutcome, TrainError> {
    let LoopSpec { config, tconfig, arch, params, partner, vdn, seed, episodes } = spec;
    let net = QNetwork::new(arch, config);
    let mut learner = Learner::new(net.clone(), params, tconfig, vdn);
    let mode = if tconfig.prioritized { SampleMode::Prioritized } else { SampleMode::Uniform };
    let mut buffer = ReplayBuffer::new(tconfig.replay_buffer_size, mode, tconfig.priority_alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x1ea7_0000));
    let game_seed_base = splitmix(seed);
    let workers = tconfig.num_workers();
    let burn_in = tconfig.burn_in_episodes.min(tconfig.replay_buffer_size);

    let evaluate = |params: &[f32]| -> Result<(f64, f64), TrainError> {
        let me = QPolicy::from_arch(arch, config, params.to_vec());
        match &partner {
            None => evaluate_alternating(config, &me, &me, tconfig.eval_games),
            Some(p) => evaluate_alternating(config, &me, p.as_ref(), tconfig.eval_games),
        }
    };

    let mut log = Vec::new();
    let (score, perfect_rate) = evaluate(learner.online())?;
    log.push(LogRow { episode: 0, step: 0, loss: None, score, perfect_rate });
    let mut worker_seen = vec![false; workers];
    let mut done = 0usize;
    let mut next_eval = tconfig.eval_every;
    let mut step_budget = 0.0f64;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;

    while done < episodes {
        let round = workers.min(episodes - done).min(next_eval - done);
        let specs: Vec<EpisodeSpec> = (0..round)
            .map(|w| {
                let e = done + w;
                EpisodeSpec {
                    worker_id: w,
                    seed: splitmix(game_seed_base ^ e as u64),
                    epsilon: tconfig.actor_epsilon(w),
                    learner_seat: e % 2,
                }
            })
            .collect();
        let setup = ActorSetup {
            config,
            net: &net,
            params: learner.online(),
            partner: partner.as_deref(),
            other_play: tconfig.other_play,
        };
        let collected = collect_round(&setup, &specs, tconfig.num_threads)?;
        let mut new_transitions = 0;
        for ep in collected {
            worker_seen[ep.worker_id] = true;
            new_transitions += ep.num_transitions();
            buffer.push(ep);
        }
        done += round;

        if buffer.len() >= burn_in && buffer.num_transitions() >= tconfig.batch_size {
            step_budget += new_transitions as f64 * tconfig.replay_ratio / tconfig.batch_size as f64;
            while step_budget >= 1.0 {
                step_budget -= 1.0;
                loss_sum += learner.train_step(&mut buffer, &mut rng)?;
                loss_count += 1;
            }
        }

        if done == next_eval || done == episodes {
            let (score, perfect_rate) = evaluate(learner.online())?;
            let loss = (loss_count > 0).then(|| loss_sum / loss_count as f64);
            log.push(LogRow { episode: done, step: learner.steps(), loss, score, perfect_rate });
            loss_sum = 0.0;
            loss_count = 0;
            if done == next_eval {
                next_eval += tconfig.eval_every;
            }
        }
    }
    let worker_ids = (0..workers).filter(|&w| worker_seen[w]).collect();
    let steps = learner.steps();
    Ok(TrainOutcome { params: learner.into_params(), steps, log, worker_ids })
}

/// Self-play training from a fresh network. Both seats share the weights.
pub fn train_selfplay(
    config: &GameConfig,
    tconfig: &TrainConfig,
    arch: Architecture,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    tconfig.validate()?;
    let net = QNetwork::new(arch, config);
    let params = net.init_params(&mut ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x1417)));
    run_loop(LoopSpec {
        config,
        tconfig,
        arch,
        params,
        partner: None,
        vdn: tconfig.vdn,
        seed,
        episodes: tconfig.total_train_episodes,
    })
}

/// Self-play training returning a checkpoint whose self-play score is the
/// final evaluation.
pub fn run_selfplay_training(
    config: &GameConfig,
    tconfig: &TrainConfig,
    arch: Architecture,
    seed: u64,
) -> Result<(Checkpoint, Vec<LogRow>), TrainError> {
    let outcome = train_selfplay(config, tconfig, arch, seed)?;
    let score = outcome.log.last().map(|r| r.score);
    let algorithm = Algorithm::from_flags(tconfig.vdn, tconfig.other_play);
    let ckpt = Checkpoint::for_network(algorithm, config, arch, outcome.params, seed, outcome.steps, score);
    Ok((ckpt, outcome.log))
}

/// Writes the training log as CSV (`episode,step,loss,score,perfect_rate`).
pub fn write_log_csv(path: impl AsRef<Path>, rows: &[LogRow]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
