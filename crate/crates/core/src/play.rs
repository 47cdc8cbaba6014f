//! Running complete games between two policies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::Policy;
use crate::engine::{observe, Action, EngineError, GameConfig, GameState, History};

#[derive(Clone, Debug, PartialEq)]
pub struct GameRecord {
    pub seed: u64,
    pub score: u32,
    pub total_reward: f64,
    pub actions: Vec<Action>,
}

/// Plays one game; `seats[p]` acts for player `p`. Exploration noise, when
/// `epsilon > 0`, is drawn from a generator derived from the game seed.
pub fn play_game(
    config: &GameConfig,
    seed: u64,
    seats: [&dyn Policy; 2],
    epsilon: f64,
) -> Result<GameRecord, EngineError> {
    let mut state = crate::engine::new_game(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut histories = [History::new(config, seats[0].history_len()), History::new(config, seats[1].history_len())];
    let mut actions = Vec::new();
    let mut total_reward = 0.0;
    while !state.is_terminal() {
        let p = state.current_player();
        histories[p].push(observe(&state, p));
        let action = seats[p].act(&histories[p], epsilon, &mut rng);
        histories[p].record_action(action.index(config));
        total_reward += state.apply(action)?.reward;
        actions.push(action);
    }
    Ok(GameRecord { seed, score: state.score(), total_reward, actions })
}

/// Replays an action sequence, returning every intermediate state.
pub fn replay(config: &GameConfig, seed: u64, actions: &[Action]) -> Result<Vec<GameState>, EngineError> {
    let mut state = crate::engine::new_game(config, seed)?;
    let mut trace = vec![state.clone()];
    for &a in actions {
        state.apply(a)?;
        trace.push(state.clone());
    }
    Ok(trace)
}

/// Greedy scores of `games` games with seeds `base_seed..base_seed + games`.
pub fn evaluate_pair(
    config: &GameConfig,
    seats: [&dyn Policy; 2],
    games: usize,
    base_seed: u64,
) -> Result<Vec<u32>, EngineError> {
    (0..games as u64)
        .map(|g| play_game(config, base_seed.wrapping_add(g), seats, 0.0).map(|r| r.score))
        .collect()
}

pub fn mean(values: &[u32]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (sample standard deviation / sqrt(n)).
pub fn std_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}
