//! Hand-written convention agents used as strong, mutually incompatible partners.
//!
//! Every family plays cards it knows to be playable, discards known-dead
//! cards first and otherwise differs in how a hint is read: as a play signal
//! on a touched card, as a play signal on a slot number, or purely as
//! information.

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use crate::engine::analysis::{is_dead, is_playable, slot_odds, unseen_counts};
use crate::engine::{Action, Card, GameConfig, History, Observation, SlotKnowledge};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// A rank hint asks the partner to play the newest card it touches.
    HintRankFirst,
    /// A color hint asks the partner to play the oldest card it touches.
    HintColorFirst,
    /// A rank hint `r` asks the partner to play slot `r mod hand length`.
    PositionalRank,
    /// A color hint `c` asks the partner to play slot `c mod hand length`.
    PositionalColor,
    /// Hints carry no convention; cards are played only when certain.
    Grounded,
}

impl Convention {
    pub const ALL: [Convention; 5] = [
        Convention::HintRankFirst,
        Convention::HintColorFirst,
        Convention::PositionalRank,
        Convention::PositionalColor,
        Convention::Grounded,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Convention::HintRankFirst => "hint-rank-first",
            Convention::HintColorFirst => "hint-color-first",
            Convention::PositionalRank => "positional-rank",
            Convention::PositionalColor => "positional-color",
            Convention::Grounded => "grounded",
        }
    }

    pub fn from_id(id: &str) -> Option<Convention> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }

    /// Whether a hint of this kind is read as a signal.
    fn signal_kind(self) -> Option<HintKind> {
        match self {
            Convention::HintRankFirst | Convention::PositionalRank => Some(HintKind::Rank),
            Convention::HintColorFirst | Convention::PositionalColor => Some(HintKind::Color),
            Convention::Grounded => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum HintKind {
    Color,
    Rank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HintPriority {
    /// Signal the partner's lowest-rank playable card first.
    LowestRank,
    /// Signal the partner's oldest playable card first.
    Oldest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleParams {
    pub hint_priority: HintPriority,
    pub discard_oldest: bool,
    /// Play an unsignalled card once its probability of being playable reaches this.
    pub play_threshold: f32,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self { hint_priority: HintPriority::LowestRank, discard_oldest: true, play_threshold: 1.0 }
    }
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("unknown convention `{0}`")]
pub struct UnknownConvention(pub String);

#[derive(Clone, Debug)]
pub struct RuleBasedAgent {
    convention: Convention,
    params: RuleParams,
    config: GameConfig,
}

pub fn make_rule_agent(
    convention_id: &str,
    params: RuleParams,
    config: &GameConfig,
) -> Result<RuleBasedAgent, UnknownConvention> {
    let convention = Convention::from_id(convention_id).ok_or_else(|| UnknownConvention(convention_id.to_string()))?;
    Ok(RuleBasedAgent::new(convention, params, config))
}

impl RuleBasedAgent {
    pub fn new(convention: Convention, params: RuleParams, config: &GameConfig) -> Self {
        Self { convention, params, config: config.clone() }
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn params(&self) -> &RuleParams {
        &self.params
    }

    pub fn choose(&self, obs: &Observation) -> Action {
        let cfg = &self.config;
        let unseen = unseen_counts(obs, cfg);
        let odds: Vec<(f32, f32)> = obs
            .own_knowledge
            .iter()
            .map(|k| slot_odds(k, &unseen, &obs.fireworks, &obs.discard, cfg))
            .collect();

        if let Some(slot) = self.signalled_slot(obs, &odds) {
            return Action::Play(slot);
        }
        if let Some(slot) = odds.iter().position(|&(p, _)| p >= self.params.play_threshold && p > 0.0) {
            return Action::Play(slot);
        }
        let max_info = cfg.info_tokens;
        if obs.info_tokens_left > 0 {
            if let Some(hint) = self.play_hint(obs) {
                return hint;
            }
        }
        if obs.info_tokens_left < max_info {
            return Action::Discard(self.discard_slot(&odds));
        }
        self.filler_hint(obs)
    }

    /// The slot the partner's last hint asks us to play, if any.
    fn signalled_slot(&self, obs: &Observation, odds: &[(f32, f32)]) -> Option<usize> {
        let last = obs.last_action.as_ref()?;
        if last.actor == obs.viewer || obs.own_knowledge.is_empty() {
            return None;
        }
        let slot = match (self.convention, last.action) {
            (Convention::HintRankFirst, Action::HintRank(_)) => highest_bit(last.touched),
            (Convention::HintColorFirst, Action::HintColor(_)) => lowest_bit(last.touched),
            (Convention::PositionalRank, Action::HintRank(r)) => Some(r as usize % obs.own_knowledge.len()),
            (Convention::PositionalColor, Action::HintColor(c)) => Some(c as usize % obs.own_knowledge.len()),
            _ => None,
        }?;
        (slot < odds.len() && odds[slot].0 > 0.0).then_some(slot)
    }

    /// The slot a given hint would ask the partner to play under our convention.
    fn slot_signalled_by(&self, hint: Action, partner_hand: &[Card]) -> Option<usize> {
        let touched: u16 = partner_hand
            .iter()
            .enumerate()
            .filter(|(_, c)| match hint {
                Action::HintColor(col) => c.color == col,
                Action::HintRank(r) => c.rank == r,
                _ => false,
            })
            .fold(0, |m, (i, _)| m | (1 << i));
        if touched == 0 {
            return None;
        }
        match (self.convention, hint) {
            (Convention::HintRankFirst, Action::HintRank(_)) => highest_bit(touched),
            (Convention::HintColorFirst, Action::HintColor(_)) => lowest_bit(touched),
            (Convention::PositionalRank, Action::HintRank(r)) => Some(r as usize % partner_hand.len()),
            (Convention::PositionalColor, Action::HintColor(c)) => Some(c as usize % partner_hand.len()),
            _ => None,
        }
    }

    fn candidate_hints(&self, obs: &Observation) -> Vec<Action> {
        let mut hints = Vec::new();
        for r in 0..self.config.num_ranks as u8 {
            if obs.partner_hand.iter().any(|c| c.rank == r) {
                hints.push(Action::HintRank(r));
            }
        }
        for col in 0..self.config.num_colors as u8 {
            if obs.partner_hand.iter().any(|c| c.color == col) {
                hints.push(Action::HintColor(col));
            }
        }
        hints
    }

    /// A hint that gets one of the partner's playable cards played.
    fn play_hint(&self, obs: &Observation) -> Option<Action> {
        let cfg = &self.config;
        let mut targets: Vec<usize> = obs
            .partner_hand
            .iter()
            .enumerate()
            .filter(|(slot, card)| {
                is_playable(**card, &obs.fireworks)
                    && !partner_knows_playable(&obs.partner_knowledge[*slot], obs, cfg)
            })
            .map(|(slot, _)| slot)
            .collect();
        if self.params.hint_priority == HintPriority::LowestRank {
            targets.sort_by_key(|&s| (obs.partner_hand[s].rank, s));
        }
        let hints = self.candidate_hints(obs);
        for &target in &targets {
            match self.convention.signal_kind() {
                Some(_) => {
                    if let Some(&h) = hints.iter().find(|&&h| {
                        self.slot_signalled_by(h, &obs.partner_hand) == Some(target)
                            && !self.signal_misfires(h, obs, target)
                    }) {
                        return Some(h);
                    }
                }
                None => {
                    if let Some(h) = self.grounding_hint(obs, target) {
                        return Some(h);
                    }
                }
            }
        }
        None
    }

    /// A signal hint also updates knowledge; never send one whose target the
    /// partner would then consider unplayable.
    fn signal_misfires(&self, hint: Action, obs: &Observation, target: usize) -> bool {
        let know = apply_hint(&obs.partner_knowledge, &obs.partner_hand, hint)[target];
        !know.allows(obs.partner_hand[target])
    }

    /// Best informative hint for a target card: one that makes it certainly
    /// playable if possible, else one that touches it with new information.
    fn grounding_hint(&self, obs: &Observation, target: usize) -> Option<Action> {
        let cfg = &self.config;
        let card = obs.partner_hand[target];
        let options = [Action::HintRank(card.rank), Action::HintColor(card.color)];
        for h in options {
            let after = apply_hint(&obs.partner_knowledge, &obs.partner_hand, h);
            if after[target] != obs.partner_knowledge[target] && partner_knows_playable(&after[target], obs, cfg) {
                return Some(h);
            }
        }
        options
            .into_iter()
            .find(|&h| apply_hint(&obs.partner_knowledge, &obs.partner_hand, h)[target] != obs.partner_knowledge[target])
    }

    fn discard_slot(&self, odds: &[(f32, f32)]) -> usize {
        if let Some(slot) = odds.iter().position(|&(_, d)| d >= 1.0) {
            return slot;
        }
        let order: Vec<usize> = if self.params.discard_oldest {
            (0..odds.len()).collect()
        } else {
            (0..odds.len()).rev().collect()
        };
        order
            .iter()
            .copied()
            .find(|&s| odds[s].0 < 0.5)
            .unwrap_or(order[0])
    }

    /// A hint that triggers no play under our convention; needed when
    /// tokens are full and nothing useful can be signalled.
    fn filler_hint(&self, obs: &Observation) -> Action {
        let hints = self.candidate_hints(obs);
        let cfg = &self.config;
        let neutral = |h: &Action| match self.convention.signal_kind() {
            Some(HintKind::Rank) => matches!(h, Action::HintColor(_)),
            Some(HintKind::Color) => matches!(h, Action::HintRank(_)),
            None => true,
        };
        // prefer hints that tell the partner something new about a useful card
        let informative = hints.iter().copied().filter(neutral).find(|&h| {
            let after = apply_hint(&obs.partner_knowledge, &obs.partner_hand, h);
            after.iter().zip(&obs.partner_knowledge).zip(&obs.partner_hand).any(|((a, b), card)| {
                a != b && !is_dead(*card, &obs.fireworks, &obs.discard, cfg)
            })
        });
        informative
            .or_else(|| hints.iter().copied().find(neutral))
            .or_else(|| {
                // every legal hint is a signal: pick one whose target is playable, else harmless
                hints.iter().copied().find(|&h| {
                    self.slot_signalled_by(h, &obs.partner_hand)
                        .is_none_or(|s| is_playable(obs.partner_hand[s], &obs.fireworks))
                })
            })
            .or_else(|| hints.first().copied())
            .unwrap_or(Action::Play(0))
    }
}

fn highest_bit(mask: u16) -> Option<usize> {
    (mask != 0).then(|| 15 - mask.leading_zeros() as usize)
}

fn lowest_bit(mask: u16) -> Option<usize> {
    (mask != 0).then(|| mask.trailing_zeros() as usize)
}

fn apply_hint(knowledge: &[SlotKnowledge], hand: &[Card], hint: Action) -> Vec<SlotKnowledge> {
    knowledge
        .iter()
        .zip(hand)
        .map(|(k, card)| {
            let mut k = *k;
            match hint {
                Action::HintColor(c) if card.color == c => {
                    k.color_mask = 1 << c;
                    k.color_hinted = true;
                }
                Action::HintColor(c) => k.color_mask &= !(1 << c),
                Action::HintRank(r) if card.rank == r => {
                    k.rank_mask = 1 << r;
                    k.rank_hinted = true;
                }
                Action::HintRank(r) => k.rank_mask &= !(1 << r),
                _ => {}
            }
            k
        })
        .collect()
}

/// Whether every identity still possible for the partner's slot (by hints and
/// public card counts) is playable.
fn partner_knows_playable(know: &SlotKnowledge, obs: &Observation, cfg: &GameConfig) -> bool {
    let mut any = false;
    for i in 0..cfg.num_card_kinds() {
        let card = cfg.card_from_index(i);
        if !know.allows(card) {
            continue;
        }
        let played = (obs.fireworks[card.color as usize] > card.rank) as u8;
        if obs.discard[i] + played >= cfg.copies(card) {
            continue;
        }
        if !is_playable(card, &obs.fireworks) {
            return false;
        }
        any = true;
    }
    any
}

impl Policy for RuleBasedAgent {
    fn greedy_index(&self, history: &History) -> usize {
        let obs = history.latest().expect("nonempty history");
        self.choose(obs).index(&self.config)
    }

    fn describe(&self) -> String {
        format!("rule[{}]", self.convention.id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{new_game, observe};

    #[test]
    fn unknown_id_is_rejected() {
        assert!(make_rule_agent("no-such", RuleParams::default(), &GameConfig::small()).is_err());
        for c in Convention::ALL {
            assert_eq!(Convention::from_id(c.id()), Some(c));
        }
    }

    #[test]
    fn choices_are_always_legal() {
        let cfg = GameConfig::small();
        for conv in Convention::ALL {
            let agent = RuleBasedAgent::new(conv, RuleParams::default(), &cfg);
            for seed in 0..200 {
                let mut s = new_game(&cfg, seed).unwrap();
                while !s.is_terminal() {
                    let a = agent.choose(&observe(&s, s.current_player()));
                    assert!(s.is_legal(a), "{conv:?} chose illegal {a}");
                    s.apply(a).unwrap();
                }
            }
        }
    }

    #[test]
    fn rank_first_reads_newest_touched() {
        let cfg = GameConfig::small();
        let agent = RuleBasedAgent::new(Convention::HintRankFirst, RuleParams::default(), &cfg);
        let mut s = new_game(&cfg, 0).unwrap();
        // find a seed where player 1 holds a playable 1
        let mut seed = 0;
        while !s.hand(1).iter().any(|c| c.rank == 0) {
            seed += 1;
            s = new_game(&cfg, seed).unwrap();
        }
        let a = agent.choose(&observe(&s, 0));
        assert!(matches!(a, Action::HintRank(0)), "got {a}");
        s.apply(a).unwrap();
        let reply = agent.choose(&observe(&s, 1));
        let newest = s.hand(1).iter().rposition(|c| c.rank == 0).unwrap();
        assert_eq!(reply, Action::Play(newest));
    }
}
