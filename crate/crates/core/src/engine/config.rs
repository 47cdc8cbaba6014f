use serde::{Deserialize, Serialize};

use super::EngineError;

/// Largest number of colors or ranks a config may declare. Hint knowledge is
/// stored as one bitmask byte per slot.
pub const MAX_SUITS: usize = 8;

/// Parameters of a two-player Hanabi game.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub num_colors: usize,
    pub num_ranks: usize,
    /// Copies of each rank in every color, lowest rank first.
    pub rank_counts: Vec<u8>,
    pub hand_size: usize,
    pub info_tokens: u8,
    pub life_tokens: u8,
    pub num_players: usize,
    /// Losing the last life token records a score of zero.
    pub bomb_zero: bool,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            num_colors: 5,
            num_ranks: 5,
            rank_counts: vec![3, 2, 2, 2, 1],
            hand_size: 5,
            info_tokens: 8,
            life_tokens: 3,
            num_players: 2,
            bomb_zero: true,
            seed: 0,
        }
    }
}

impl GameConfig {
    /// The 2-color, 5-rank, hand-2 game used for desk-scale experiments.
    pub fn small() -> Self {
        Self {
            num_colors: 2,
            hand_size: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::InvalidConfig(msg));
        if self.num_players != 2 {
            return bad(format!("only two players are supported, got {}", self.num_players));
        }
        if self.num_colors == 0 || self.num_colors > MAX_SUITS {
            return bad(format!("num_colors must be in 1..={MAX_SUITS}"));
        }
        if self.num_ranks == 0 || self.num_ranks > MAX_SUITS {
            return bad(format!("num_ranks must be in 1..={MAX_SUITS}"));
        }
        if self.rank_counts.len() != self.num_ranks {
            return bad(format!(
                "rank_counts has {} entries for {} ranks",
                self.rank_counts.len(),
                self.num_ranks
            ));
        }
        if self.rank_counts.iter().any(|&c| c == 0) {
            return bad("every rank needs at least one copy".into());
        }
        if self.hand_size == 0 {
            return bad("hand_size must be positive".into());
        }
        if self.hand_size * self.num_players > self.deck_size() {
            return bad(format!(
                "hand_size {} x {} players exceeds deck size {}",
                self.hand_size,
                self.num_players,
                self.deck_size()
            ));
        }
        if self.info_tokens == 0 || self.life_tokens == 0 {
            return bad("info_tokens and life_tokens must be positive".into());
        }
        Ok(())
    }

    pub fn deck_size(&self) -> usize {
        self.num_colors * self.rank_counts.iter().map(|&c| c as usize).sum::<usize>()
    }

    pub fn max_score(&self) -> u32 {
        (self.num_colors * self.num_ranks) as u32
    }

    /// Number of distinct card identities (color x rank).
    pub fn num_card_kinds(&self) -> usize {
        self.num_colors * self.num_ranks
    }

    pub fn card_index(&self, card: Card) -> usize {
        card.color as usize * self.num_ranks + card.rank as usize
    }

    pub fn card_from_index(&self, index: usize) -> Card {
        Card::new((index / self.num_ranks) as u8, (index % self.num_ranks) as u8)
    }

    pub fn copies(&self, card: Card) -> u8 {
        self.rank_counts[card.rank as usize]
    }

    pub fn num_actions(&self) -> usize {
        2 * self.hand_size + self.num_colors + self.num_ranks
    }

    /// Every card of the game in canonical (color, rank, copy) order.
    pub fn full_deck(&self) -> Vec<Card> {
        let mut deck = Vec::with_capacity(self.deck_size());
        for color in 0..self.num_colors {
            for (rank, &count) in self.rank_counts.iter().enumerate() {
                for _ in 0..count {
                    deck.push(Card::new(color as u8, rank as u8));
                }
            }
        }
        deck
    }

    /// Same rules with a different default seed; seeds do not affect
    /// compatibility between agents.
    pub fn rules_eq(&self, other: &GameConfig) -> bool {
        GameConfig { seed: 0, ..self.clone() } == GameConfig { seed: 0, ..other.clone() }
    }
}

/// Maximum achievable score for a configuration: every firework completed.
pub fn max_score(config: &GameConfig) -> u32 {
    config.max_score()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Card {
    pub color: u8,
    pub rank: u8,
}

impl Card {
    pub const fn new(color: u8, rank: u8) -> Self {
        Self { color, rank }
    }
}

impl std::fmt::Display for Card {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        const NAMES: &[u8] = b"RYGWBMKP";
        write!(f, "{}{}", NAMES[self.color as usize] as char, self.rank + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_deck_and_score() {
        let cfg = GameConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.deck_size(), 50);
        assert_eq!(cfg.full_deck().len(), 50);
        assert_eq!(max_score(&cfg), 25);
        assert_eq!(cfg.num_actions(), 20);
    }

    #[test]
    fn max_score_small_configs() {
        assert_eq!(max_score(&GameConfig::small()), 10);
        let tiny = GameConfig {
            num_colors: 1,
            num_ranks: 1,
            rank_counts: vec![3],
            hand_size: 1,
            ..GameConfig::default()
        };
        tiny.validate().unwrap();
        assert_eq!(max_score(&tiny), 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let too_big_hand = GameConfig { hand_size: 26, ..GameConfig::default() };
        assert!(matches!(too_big_hand.validate(), Err(EngineError::InvalidConfig(_))));
        let three_players = GameConfig { num_players: 3, ..GameConfig::default() };
        assert!(three_players.validate().is_err());
        let mismatch = GameConfig { num_ranks: 4, ..GameConfig::default() };
        assert!(mismatch.validate().is_err());
    }

    #[test]
    fn card_index_round_trip() {
        let cfg = GameConfig::default();
        for i in 0..cfg.num_card_kinds() {
            assert_eq!(cfg.card_index(cfg.card_from_index(i)), i);
        }
    }
}
