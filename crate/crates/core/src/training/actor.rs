use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::replay::{Episode, Track};
use super::TrainError;
use crate::agents::{masked_argmax, write_window, Policy, QNetwork};
use crate::engine::{
    encode_observation, invert_permutation, new_game, observe, Action, ColorSymmetric, GameConfig, History,
};

/// Network input for own turn `i` of `track`: the window of own observations
/// ending there, each paired with the action taken before it.
pub fn track_window(track: &Track, i: usize, net: &QNetwork, out: &mut [f32]) {
    let num_actions = net.num_actions();
    let obs_dim = net.step_dim() - num_actions;
    let h = net.architecture().history_len;
    let start = (i + 1).saturating_sub(h);
    let steps = (start..i + 1).map(|j| {
        let prev = if j > 0 { Some(track.actions[j - 1] as usize) } else { None };
        (&track.obs[j * obs_dim..(j + 1) * obs_dim], prev)
    });
    write_window(steps, h, obs_dim, num_actions, out);
}

/// What the actors play with during a round.
#[derive(Clone, Copy)]
pub struct ActorSetup<'a> {
    pub config: &'a GameConfig,
    pub net: &'a QNetwork,
    /// Parameter snapshot published for this round.
    pub params: &'a [f32],
    /// Frozen partner; `None` means both seats are played by the network.
    pub partner: Option<&'a dyn Policy>,
    pub other_play: bool,
}

/// One game to collect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSpec {
    pub worker_id: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Seat of the network when playing against a partner.
    pub learner_seat: usize,
}

fn is_identity(perm: &[usize]) -> bool {
    perm.iter().enumerate().all(|(i, &p)| i == p)
}

/// Plays one exploratory episode and records the network's own turns.
pub fn run_episode(setup: &ActorSetup, spec: &EpisodeSpec) -> Result<Episode, TrainError> {
    let config = setup.config;
    let net = setup.net;
    let num_colors = config.num_colors;
    let mut state = new_game(config, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xa076_1d64_78bd_642f);

    let learned: Vec<usize> = match setup.partner {
        None => vec![0, 1],
        Some(_) => vec![spec.learner_seat],
    };
    let mut perms: Vec<Vec<usize>> = vec![(0..num_colors).collect(); 2];
    if setup.other_play {
        for &s in &learned {
            for i in (1..num_colors).rev() {
                perms[s].swap(i, rng.gen_range(0..=i));
            }
        }
    }
    let inverses: Vec<Vec<usize>> = perms.iter().map(|p| invert_permutation(p)).collect();
    let mut tracks: Vec<Option<Track>> = (0..2).map(|s| learned.contains(&s).then(|| Track::new(s))).collect();
    let mut partner_history = setup.partner.map(|p| History::new(config, p.history_len()));
    let mut turn_rewards = Vec::new();
    let mut input = vec![0.0f32; net.input_dim()];

    while !state.is_terminal() {
        let p = state.current_player();
        let action = if let Some(track) = tracks[p].as_mut() {
            let mut obs = observe(&state, p);
            if !is_identity(&perms[p]) {
                obs = obs.relabel(&perms[p], config);
            }
            track.obs.extend(encode_observation(&obs, config));
            track.legal.extend_from_slice(&obs.legal_action_mask);
            let i = track.actions.len();
            track.actions.push(0);
            track.rewards.push(0.0);
            track_window(track, i, net, &mut input);
            let a = if spec.epsilon > 0.0 && rng.gen_bool(spec.epsilon.min(1.0)) {
                let legal: Vec<usize> = obs.legal_indices().collect();
                legal[rng.gen_range(0..legal.len())]
            } else {
                let q = net.q_values(setup.params, &input);
                masked_argmax(&q, &obs.legal_action_mask).expect("no legal action")
            };
            track.actions[i] = a as u16;
            Action::from_index(a, config).relabel(&inverses[p], config)
        } else {
            let history = partner_history.as_mut().unwrap();
            history.push(observe(&state, p));
            let a = setup.partner.unwrap().act(history, 0.0, &mut rng);
            history.record_action(a.index(config));
            a
        };
        let reward = state.apply(action)?.reward as f32;
        turn_rewards.push(reward);
        for track in tracks.iter_mut().flatten() {
            if let Some(last) = track.rewards.last_mut() {
                *last += reward;
            }
        }
    }
    Ok(Episode {
        worker_id: spec.worker_id,
        tracks: tracks.into_iter().flatten().collect(),
        turn_rewards,
        score: state.score(),
    })
}

/// Plays every spec on up to `threads` OS threads. Results come back in spec
/// order whatever the thread count, so a round is deterministic.
pub fn collect_round(setup: &ActorSetup, specs: &[EpisodeSpec], threads: usize) -> Result<Vec<Episode>, TrainError> {
    let threads = threads.clamp(1, specs.len().max(1));
    if threads == 1 {
        return specs.iter().map(|s| run_episode(setup, s)).collect();
    }
    let chunk = specs.len().div_ceil(threads);
    let results: Vec<Result<Vec<Episode>, TrainError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = specs
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| run_episode(setup, s)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("actor thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(specs.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{make_rule_agent, Architecture, RuleParams};

    fn setup_parts() -> (GameConfig, QNetwork, Vec<f32>) {
        let config = GameConfig::small();
        let net = QNetwork::new(Architecture { hidden_dim: 16, history_len: 2, ..Architecture::default() }, &config);
        let params = net.init_params(&mut ChaCha8Rng::seed_from_u64(3));
        (config, net, params)
    }

    #[test]
    fn selfplay_episode_rewards_sum_to_score() {
        let (config, net, params) = setup_parts();
        let setup = ActorSetup { config: &config, net: &net, params: &params, partner: None, other_play: true };
        for seed in 0..20 {
            let ep = run_episode(&setup, &EpisodeSpec { worker_id: 0, seed, epsilon: 0.5, learner_seat: 0 }).unwrap();
            let total: f32 = ep.turn_rewards.iter().sum();
            assert_eq!(total, ep.score as f32);
            assert_eq!(ep.num_transitions(), ep.turn_rewards.len());
            let seat0: f32 = ep.tracks[0].rewards.iter().sum();
            assert_eq!(seat0, total);
        }
    }

    #[test]
    fn partner_episode_stores_learner_only() {
        let (config, net, params) = setup_parts();
        let rule = make_rule_agent("grounded", RuleParams::default(), &config).unwrap();
        let setup = ActorSetup { config: &config, net: &net, params: &params, partner: Some(&rule), other_play: false };
        let ep = run_episode(&setup, &EpisodeSpec { worker_id: 2, seed: 9, epsilon: 0.1, learner_seat: 1 }).unwrap();
        assert_eq!(ep.tracks.len(), 1);
        assert_eq!(ep.tracks[0].seat, 1);
        assert_eq!(ep.tracks[0].len(), ep.turn_rewards.len() / 2);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (config, net, params) = setup_parts();
        let setup = ActorSetup { config: &config, net: &net, params: &params, partner: None, other_play: false };
        let specs: Vec<EpisodeSpec> =
            (0..7).map(|i| EpisodeSpec { worker_id: i, seed: 100 + i as u64, epsilon: 0.2, learner_seat: 0 }).collect();
        assert_eq!(collect_round(&setup, &specs, 1).unwrap(), collect_round(&setup, &specs, 3).unwrap());
    }
}
