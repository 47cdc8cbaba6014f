use serde::{Deserialize, Serialize};

use super::state::{permute_knowledge, permute_last_action};
use super::{Card, GameState, LastAction, SlotKnowledge};

/// One player's view of the game. The viewer's own cards are represented only
/// through the hints they have received.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub viewer: usize,
    pub current_player: usize,
    pub partner_hand: Vec<Card>,
    /// What the partner has been told about their own cards.
    pub partner_knowledge: Vec<SlotKnowledge>,
    pub own_knowledge: Vec<SlotKnowledge>,
    pub fireworks: Vec<u8>,
    pub discard: Vec<u8>,
    pub info_tokens_left: u8,
    pub life_tokens_left: u8,
    pub deck_remaining: usize,
    pub last_action: Option<LastAction>,
    /// Legal action indices for the viewer; all false when it is not their turn.
    pub legal_action_mask: Vec<bool>,
}

impl Observation {
    pub fn is_my_turn(&self) -> bool {
        self.viewer == self.current_player && self.legal_action_mask.iter().any(|&b| b)
    }

    pub fn legal_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.legal_action_mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub(crate) fn relabel_colors(&self, perm: &[usize], config: &super::GameConfig) -> Observation {
        let map_card = |c: &Card| Card::new(perm[c.color as usize] as u8, c.rank);
        let mut fireworks = vec![0; self.fireworks.len()];
        for (c, &h) in self.fireworks.iter().enumerate() {
            fireworks[perm[c]] = h;
        }
        let mut discard = vec![0; self.discard.len()];
        for (i, &d) in self.discard.iter().enumerate() {
            discard[config.card_index(map_card(&config.card_from_index(i)))] = d;
        }
        let k2 = 2 * config.hand_size;
        let mut legal = self.legal_action_mask.clone();
        for (c, &to) in perm.iter().enumerate() {
            legal[k2 + to] = self.legal_action_mask[k2 + c];
        }
        Observation {
            viewer: self.viewer,
            current_player: self.current_player,
            partner_hand: self.partner_hand.iter().map(map_card).collect(),
            partner_knowledge: self.partner_knowledge.iter().map(|k| permute_knowledge(k, perm)).collect(),
            own_knowledge: self.own_knowledge.iter().map(|k| permute_knowledge(k, perm)).collect(),
            fireworks,
            discard,
            info_tokens_left: self.info_tokens_left,
            life_tokens_left: self.life_tokens_left,
            deck_remaining: self.deck_remaining,
            last_action: self.last_action.as_ref().map(|l| permute_last_action(l, perm)),
            legal_action_mask: legal,
        }
    }
}

/// The observation of `player` in `state`.
pub fn observe(state: &GameState, player: usize) -> Observation {
    let partner = 1 - player;
    let legal_action_mask = if state.current_player() == player {
        state.legal_mask()
    } else {
        vec![false; state.config().num_actions()]
    };
    Observation {
        viewer: player,
        current_player: state.current_player(),
        partner_hand: state.hand(partner).to_vec(),
        partner_knowledge: state.knowledge(partner).to_vec(),
        own_knowledge: state.knowledge(player).to_vec(),
        fireworks: state.fireworks().to_vec(),
        discard: state.discard_counts().to_vec(),
        info_tokens_left: state.info_tokens(),
        life_tokens_left: state.life_tokens(),
        deck_remaining: state.deck_remaining(),
        last_action: state.last_action().cloned(),
        legal_action_mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{new_game, Action, GameConfig};

    #[test]
    fn own_cards_are_hidden() {
        let s = new_game(&GameConfig::default(), 11).unwrap();
        let o = observe(&s, 0);
        assert_eq!(o.partner_hand, s.hand(1));
        assert_eq!(o.own_knowledge.len(), 5);
        // the struct has no field carrying the viewer's cards; knowledge is fresh
        assert!(o.own_knowledge.iter().all(|k| k.color_mask == 0b11111 && k.rank_mask == 0b11111));
    }

    #[test]
    fn public_information_matches() {
        let mut s = new_game(&GameConfig::default(), 11).unwrap();
        s.apply(Action::Play(0)).unwrap();
        let (a, b) = (observe(&s, 0), observe(&s, 1));
        assert_eq!(a.fireworks, b.fireworks);
        assert_eq!(a.discard, b.discard);
        assert_eq!(a.info_tokens_left, b.info_tokens_left);
        assert_eq!(a.life_tokens_left, b.life_tokens_left);
        assert_eq!(a.last_action, b.last_action);
        assert!(!a.is_my_turn());
        assert!(b.is_my_turn());
    }

    #[test]
    fn rank_hint_flags_viewer_slots() {
        let cfg = GameConfig::default();
        let mut s = new_game(&cfg, 3).unwrap();
        let rank = s.hand(1)[2].rank;
        s.apply(Action::HintRank(rank)).unwrap();
        let o = observe(&s, 1);
        for (slot, card) in s.hand(1).iter().enumerate() {
            assert_eq!(o.own_knowledge[slot].rank_hinted, card.rank == rank);
        }
    }
}
