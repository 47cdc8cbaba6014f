//! Card-level inferences available to a player from public information.

use super::{Card, GameConfig, Observation, SlotKnowledge};

pub fn is_playable(card: Card, fireworks: &[u8]) -> bool {
    fireworks[card.color as usize] == card.rank
}

/// A card is dead when it can never be played: its rank is already on the
/// firework, or every copy of some lower rank in its color is discarded.
pub fn is_dead(card: Card, fireworks: &[u8], discard: &[u8], config: &GameConfig) -> bool {
    let height = fireworks[card.color as usize];
    if card.rank < height {
        return true;
    }
    (height..card.rank).any(|r| {
        let lower = Card::new(card.color, r);
        discard[config.card_index(lower)] >= config.copies(lower)
    })
}

/// Copies of each card index not visible to the viewer (deck plus own hand).
pub fn unseen_counts(obs: &Observation, config: &GameConfig) -> Vec<u8> {
    let mut counts: Vec<u8> = (0..config.num_card_kinds())
        .map(|i| config.copies(config.card_from_index(i)))
        .collect();
    for (i, &d) in obs.discard.iter().enumerate() {
        counts[i] -= d;
    }
    for (color, &h) in obs.fireworks.iter().enumerate() {
        for rank in 0..h {
            counts[config.card_index(Card::new(color as u8, rank))] -= 1;
        }
    }
    for card in &obs.partner_hand {
        counts[config.card_index(*card)] -= 1;
    }
    counts
}

/// Probability that a hidden slot is playable and that it is dead, weighting
/// each hint-consistent identity by its unseen copy count.
pub fn slot_odds(
    know: &SlotKnowledge,
    unseen: &[u8],
    fireworks: &[u8],
    discard: &[u8],
    config: &GameConfig,
) -> (f32, f32) {
    let mut total = 0u32;
    let mut playable = 0u32;
    let mut dead = 0u32;
    for (i, &n) in unseen.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let card = config.card_from_index(i);
        if !know.allows(card) {
            continue;
        }
        total += n as u32;
        if is_playable(card, fireworks) {
            playable += n as u32;
        } else if is_dead(card, fireworks, discard, config) {
            dead += n as u32;
        }
    }
    if total == 0 {
        return (0.0, 0.0);
    }
    (playable as f32 / total as f32, dead as f32 / total as f32)
}
