//! Deterministic two-player Hanabi.

mod action;
pub mod analysis;
mod config;
mod encoding;
mod history;
mod observation;
mod state;

pub use action::{Action, LastAction};
pub use config::{max_score, Card, GameConfig, MAX_SUITS};
pub use encoding::{encode_into, encode_observation, encoded_dim, ENCODING_VERSION};
pub use history::{History, HistoryEntry};
pub use observation::{observe, Observation};
pub use state::{new_game, GameState, SlotKnowledge, StepResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error("illegal action {0}")]
    IllegalAction(Action),
    #[error("the game is over")]
    GameOver,
    #[error("not a permutation of {0} colors")]
    InvalidPermutation(usize),
}

/// Types whose color labels can be consistently renamed.
pub trait ColorSymmetric: Sized {
    /// `perm[c]` is the new label of color `c`.
    fn relabel(&self, perm: &[usize], config: &GameConfig) -> Self;
}

impl ColorSymmetric for GameState {
    fn relabel(&self, perm: &[usize], _config: &GameConfig) -> Self {
        self.relabel_colors(perm)
    }
}

impl ColorSymmetric for Observation {
    fn relabel(&self, perm: &[usize], config: &GameConfig) -> Self {
        self.relabel_colors(perm, config)
    }
}

impl ColorSymmetric for Action {
    fn relabel(&self, perm: &[usize], _config: &GameConfig) -> Self {
        state::permute_action(*self, perm)
    }
}

pub fn validate_permutation(perm: &[usize], num_colors: usize) -> Result<(), EngineError> {
    let mut seen = vec![false; num_colors];
    if perm.len() != num_colors {
        return Err(EngineError::InvalidPermutation(num_colors));
    }
    for &p in perm {
        if p >= num_colors || std::mem::replace(&mut seen[p], true) {
            return Err(EngineError::InvalidPermutation(num_colors));
        }
    }
    Ok(())
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (c, &to) in perm.iter().enumerate() {
        inv[to] = c;
    }
    inv
}

/// Renames colors in a state, observation or action.
pub fn apply_color_permutation<T: ColorSymmetric>(
    x: &T,
    perm: &[usize],
    config: &GameConfig,
) -> Result<T, EngineError> {
    validate_permutation(perm, config.num_colors)?;
    Ok(x.relabel(perm, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(cfg: &GameConfig, rng: &mut ChaCha8Rng) -> GameState {
        let mut s = new_game(cfg, rng.gen()).unwrap();
        let steps = rng.gen_range(0..20);
        for _ in 0..steps {
            if s.is_terminal() {
                break;
            }
            let legal = s.legal_actions().unwrap();
            s.apply(legal[rng.gen_range(0..legal.len())]).unwrap();
        }
        s
    }

    #[test]
    fn identity_and_inverse() {
        let cfg = GameConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = random_state(&cfg, &mut rng);
            let id: Vec<usize> = (0..cfg.num_colors).collect();
            assert_eq!(apply_color_permutation(&s, &id, &cfg).unwrap(), s);
            let mut perm = id.clone();
            perm.shuffle(&mut rng);
            let inv = invert_permutation(&perm);
            let there = apply_color_permutation(&s, &perm, &cfg).unwrap();
            assert_eq!(apply_color_permutation(&there, &inv, &cfg).unwrap(), s);
            assert_eq!(there.score(), s.score());
            let o = observe(&s, 1);
            let back = apply_color_permutation(&apply_color_permutation(&o, &perm, &cfg).unwrap(), &inv, &cfg).unwrap();
            assert_eq!(back, o);
        }
    }

    #[test]
    fn rejects_non_bijections() {
        let cfg = GameConfig::small();
        let s = new_game(&cfg, 0).unwrap();
        assert!(apply_color_permutation(&s, &[0, 0], &cfg).is_err());
        assert!(apply_color_permutation(&s, &[0], &cfg).is_err());
        assert!(apply_color_permutation(&s, &[0, 2], &cfg).is_err());
    }

    #[test]
    fn legal_actions_commute_with_relabeling() {
        let cfg = GameConfig::small();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let s = random_state(&cfg, &mut rng);
            if s.is_terminal() {
                continue;
            }
            let mut perm: Vec<usize> = (0..cfg.num_colors).collect();
            perm.shuffle(&mut rng);
            let relabeled = apply_color_permutation(&s, &perm, &cfg).unwrap();
            let mut lhs: Vec<_> = s.legal_actions().unwrap().iter().map(|a| a.relabel(&perm, &cfg)).collect();
            let mut rhs = relabeled.legal_actions().unwrap();
            lhs.sort_by_key(|a| a.index(&cfg));
            rhs.sort_by_key(|a| a.index(&cfg));
            assert_eq!(lhs, rhs);
            let obs_perm = observe(&relabeled, s.current_player());
            let perm_obs = apply_color_permutation(&observe(&s, s.current_player()), &perm, &cfg).unwrap();
            assert_eq!(obs_perm, perm_obs);
        }
    }
}
