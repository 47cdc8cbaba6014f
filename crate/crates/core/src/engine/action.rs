use serde::{Deserialize, Serialize};

use super::{Card, GameConfig};

/// A move by the current player. Hints always target the partner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Play(usize),
    Discard(usize),
    HintColor(u8),
    HintRank(u8),
}

impl Action {
    /// Flat index in `[0, config.num_actions())`.
    ///
    /// Layout: discards by slot, plays by slot, color hints, rank hints.
    pub fn index(self, config: &GameConfig) -> usize {
        let k = config.hand_size;
        match self {
            Action::Discard(slot) => slot,
            Action::Play(slot) => k + slot,
            Action::HintColor(c) => 2 * k + c as usize,
            Action::HintRank(r) => 2 * k + config.num_colors + r as usize,
        }
    }

    pub fn from_index(index: usize, config: &GameConfig) -> Action {
        let k = config.hand_size;
        let c = config.num_colors;
        match index {
            i if i < k => Action::Discard(i),
            i if i < 2 * k => Action::Play(i - k),
            i if i < 2 * k + c => Action::HintColor((i - 2 * k) as u8),
            i => {
                debug_assert!(i < config.num_actions());
                Action::HintRank((i - 2 * k - c) as u8)
            }
        }
    }

    pub fn is_hint(self) -> bool {
        matches!(self, Action::HintColor(_) | Action::HintRank(_))
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Play(s) => write!(f, "play[{s}]"),
            Action::Discard(s) => write!(f, "discard[{s}]"),
            Action::HintColor(c) => write!(f, "hint-color[{c}]"),
            Action::HintRank(r) => write!(f, "hint-rank[{}]", r + 1),
        }
    }
}

/// Public result of the most recent action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LastAction {
    pub actor: usize,
    pub action: Action,
    /// Card revealed by a play or discard.
    pub card: Option<Card>,
    /// Whether a play landed on its firework.
    pub success: Option<bool>,
    /// Slots of the hinted hand touched by a hint, as a bitmask.
    pub touched: u16,
}
