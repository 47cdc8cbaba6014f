use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Action, Card, EngineError, GameConfig, LastAction};

/// What a player has been told about one card in their hand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotKnowledge {
    /// Bit `c` set while color `c` is still consistent with all hints.
    pub color_mask: u8,
    pub rank_mask: u8,
    pub color_hinted: bool,
    pub rank_hinted: bool,
}

impl SlotKnowledge {
    pub fn fresh(config: &GameConfig) -> Self {
        Self {
            color_mask: full_mask(config.num_colors),
            rank_mask: full_mask(config.num_ranks),
            color_hinted: false,
            rank_hinted: false,
        }
    }

    pub fn allows(&self, card: Card) -> bool {
        self.color_mask & (1 << card.color) != 0 && self.rank_mask & (1 << card.rank) != 0
    }

    pub fn color_known(&self) -> Option<u8> {
        single_bit(self.color_mask)
    }

    pub fn rank_known(&self) -> Option<u8> {
        single_bit(self.rank_mask)
    }
}

pub(crate) fn full_mask(n: usize) -> u8 {
    ((1u16 << n) - 1) as u8
}

fn single_bit(mask: u8) -> Option<u8> {
    (mask.count_ones() == 1).then(|| mask.trailing_zeros() as u8)
}

/// Result of applying one action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub terminal: bool,
}

/// Full state of a game. Cards are drawn from the back of `deck`; new cards
/// are appended to the end of a hand, so slot 0 is always the oldest card.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    config: Arc<GameConfig>,
    pub(crate) deck: Vec<Card>,
    pub(crate) hands: Vec<Vec<Card>>,
    pub(crate) knowledge: Vec<Vec<SlotKnowledge>>,
    pub(crate) fireworks: Vec<u8>,
    /// Discarded (or misplayed) copies per card index.
    pub(crate) discard: Vec<u8>,
    pub(crate) info_tokens: u8,
    pub(crate) life_tokens: u8,
    pub(crate) current_player: usize,
    pub(crate) turn: u32,
    pub(crate) final_round_countdown: Option<u8>,
    pub(crate) last_action: Option<LastAction>,
    pub(crate) terminal: bool,
    seed: u64,
}

/// Deal a fresh game. The deck order depends only on `(config, seed)`.
pub fn new_game(config: &GameConfig, seed: u64) -> Result<GameState, EngineError> {
    GameState::new(Arc::new(config.clone()), seed)
}

impl GameState {
    pub fn new(config: Arc<GameConfig>, seed: u64) -> Result<Self, EngineError> {
        config.validate()?;
        let mut deck = config.full_deck();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        deck.shuffle(&mut rng);
        let players = config.num_players;
        let mut hands = vec![Vec::with_capacity(config.hand_size); players];
        for _ in 0..config.hand_size {
            for hand in hands.iter_mut() {
                hand.push(deck.pop().expect("validated deck size"));
            }
        }
        let fresh = SlotKnowledge::fresh(&config);
        let knowledge = vec![vec![fresh; config.hand_size]; players];
        let final_round_countdown = deck.is_empty().then_some(players as u8);
        Ok(Self {
            deck,
            hands,
            knowledge,
            fireworks: vec![0; config.num_colors],
            discard: vec![0; config.num_card_kinds()],
            info_tokens: config.info_tokens,
            life_tokens: config.life_tokens,
            current_player: 0,
            turn: 0,
            final_round_countdown,
            last_action: None,
            terminal: false,
            seed,
            config,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn shared_config(&self) -> &Arc<GameConfig> {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn current_player(&self) -> usize {
        self.current_player
    }

    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn deck_remaining(&self) -> usize {
        self.deck.len()
    }

    pub fn deck(&self) -> &[Card] {
        &self.deck
    }

    pub fn hand(&self, player: usize) -> &[Card] {
        &self.hands[player]
    }

    pub fn knowledge(&self, player: usize) -> &[SlotKnowledge] {
        &self.knowledge[player]
    }

    pub fn fireworks(&self) -> &[u8] {
        &self.fireworks
    }

    pub fn discard_counts(&self) -> &[u8] {
        &self.discard
    }

    pub fn info_tokens(&self) -> u8 {
        self.info_tokens
    }

    pub fn life_tokens(&self) -> u8 {
        self.life_tokens
    }

    pub fn final_round_countdown(&self) -> Option<u8> {
        self.final_round_countdown
    }

    pub fn last_action(&self) -> Option<&LastAction> {
        self.last_action.as_ref()
    }

    /// Recorded score: firework heights, or zero after a bomb-out under `bomb_zero`.
    pub fn score(&self) -> u32 {
        if self.life_tokens == 0 && self.config.bomb_zero {
            0
        } else {
            self.fireworks_total()
        }
    }

    pub fn fireworks_total(&self) -> u32 {
        self.fireworks.iter().map(|&h| h as u32).sum()
    }

    fn partner(&self) -> usize {
        1 - self.current_player
    }

    pub fn is_legal(&self, action: Action) -> bool {
        if self.terminal {
            return false;
        }
        let cfg = &*self.config;
        let hand = &self.hands[self.current_player];
        match action {
            Action::Play(slot) => slot < hand.len(),
            Action::Discard(slot) => slot < hand.len() && self.info_tokens < cfg.info_tokens,
            Action::HintColor(c) => {
                (c as usize) < cfg.num_colors
                    && self.info_tokens > 0
                    && self.hands[self.partner()].iter().any(|card| card.color == c)
            }
            Action::HintRank(r) => {
                (r as usize) < cfg.num_ranks
                    && self.info_tokens > 0
                    && self.hands[self.partner()].iter().any(|card| card.rank == r)
            }
        }
    }

    /// Legality of every action index for the current player; all false once terminal.
    pub fn legal_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.config.num_actions()];
        self.fill_legal_mask(&mut mask);
        mask
    }

    pub(crate) fn fill_legal_mask(&self, mask: &mut [bool]) {
        mask.fill(false);
        if self.terminal {
            return;
        }
        let cfg = &*self.config;
        let k = cfg.hand_size;
        let hand_len = self.hands[self.current_player].len();
        for slot in 0..hand_len {
            mask[k + slot] = true;
            if self.info_tokens < cfg.info_tokens {
                mask[slot] = true;
            }
        }
        if self.info_tokens > 0 {
            for card in &self.hands[self.partner()] {
                mask[2 * k + card.color as usize] = true;
                mask[2 * k + cfg.num_colors + card.rank as usize] = true;
            }
        }
    }

    pub fn legal_actions(&self) -> Result<Vec<Action>, EngineError> {
        if self.terminal {
            return Err(EngineError::GameOver);
        }
        let cfg = &*self.config;
        Ok(self
            .legal_mask()
            .iter()
            .enumerate()
            .filter(|(_, &legal)| legal)
            .map(|(i, _)| Action::from_index(i, cfg))
            .collect())
    }

    /// Copy-on-step transition.
    pub fn step(&self, action: Action) -> Result<(GameState, f64, bool), EngineError> {
        let mut next = self.clone();
        let result = next.apply(action)?;
        Ok((next, result.reward, result.terminal))
    }

    /// In-place transition. The reward is the change in recorded score, so the
    /// rewards of an episode always sum to its final score.
    pub fn apply(&mut self, action: Action) -> Result<StepResult, EngineError> {
        if self.terminal {
            return Err(EngineError::GameOver);
        }
        if !self.is_legal(action) {
            return Err(EngineError::IllegalAction(action));
        }
        let before = self.score() as f64;
        let actor = self.current_player;
        let partner = self.partner();
        let num_ranks = self.config.num_ranks as u8;
        let max_info = self.config.info_tokens;
        let mut last = LastAction { actor, action, card: None, success: None, touched: 0 };
        let mut drew_last_card = false;

        match action {
            Action::Play(slot) => {
                let card = self.hands[actor].remove(slot);
                self.knowledge[actor].remove(slot);
                let height = &mut self.fireworks[card.color as usize];
                if *height == card.rank {
                    *height += 1;
                    if *height == num_ranks && self.info_tokens < max_info {
                        self.info_tokens += 1;
                    }
                    last.success = Some(true);
                } else {
                    self.life_tokens -= 1;
                    let idx = self.config.card_index(card);
                    self.discard[idx] += 1;
                    last.success = Some(false);
                }
                last.card = Some(card);
                drew_last_card = self.draw(actor);
            }
            Action::Discard(slot) => {
                let card = self.hands[actor].remove(slot);
                self.knowledge[actor].remove(slot);
                let idx = self.config.card_index(card);
                self.discard[idx] += 1;
                self.info_tokens += 1;
                last.card = Some(card);
                drew_last_card = self.draw(actor);
            }
            Action::HintColor(color) => {
                self.info_tokens -= 1;
                let bit = 1u8 << color;
                for (slot, card) in self.hands[partner].iter().enumerate() {
                    let know = &mut self.knowledge[partner][slot];
                    if card.color == color {
                        know.color_mask = bit;
                        know.color_hinted = true;
                        last.touched |= 1 << slot;
                    } else {
                        know.color_mask &= !bit;
                    }
                }
            }
            Action::HintRank(rank) => {
                self.info_tokens -= 1;
                let bit = 1u8 << rank;
                for (slot, card) in self.hands[partner].iter().enumerate() {
                    let know = &mut self.knowledge[partner][slot];
                    if card.rank == rank {
                        know.rank_mask = bit;
                        know.rank_hinted = true;
                        last.touched |= 1 << slot;
                    } else {
                        know.rank_mask &= !bit;
                    }
                }
            }
        }

        match self.final_round_countdown {
            Some(n) => self.final_round_countdown = Some(n - 1),
            None if drew_last_card => {
                self.final_round_countdown = Some(self.config.num_players as u8)
            }
            None => {}
        }

        self.last_action = Some(last);
        self.current_player = partner;
        self.turn += 1;
        self.terminal = self.life_tokens == 0
            || self.fireworks_total() == self.config.max_score()
            || self.final_round_countdown == Some(0);
        let reward = self.score() as f64 - before;
        Ok(StepResult { reward, terminal: self.terminal })
    }

    /// Returns true when this draw emptied the deck.
    fn draw(&mut self, player: usize) -> bool {
        match self.deck.pop() {
            Some(card) => {
                self.hands[player].push(card);
                self.knowledge[player].push(SlotKnowledge::fresh(&self.config));
                self.deck.is_empty()
            }
            None => false,
        }
    }

    /// Number of copies of each card index across deck, hands, discard and
    /// played fireworks. Equals the full deck composition in every reachable state.
    pub fn card_census(&self) -> Vec<u32> {
        let cfg = &*self.config;
        let mut counts = vec![0u32; cfg.num_card_kinds()];
        for card in self.deck.iter().chain(self.hands.iter().flatten()) {
            counts[cfg.card_index(*card)] += 1;
        }
        for (i, &d) in self.discard.iter().enumerate() {
            counts[i] += d as u32;
        }
        for (color, &height) in self.fireworks.iter().enumerate() {
            for rank in 0..height {
                counts[cfg.card_index(Card::new(color as u8, rank))] += 1;
            }
        }
        counts
    }

    /// Checks every structural invariant; returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let cfg = &*self.config;
        let census = self.card_census();
        for (i, &n) in census.iter().enumerate() {
            let expected = cfg.copies(cfg.card_from_index(i)) as u32;
            if n != expected {
                return Err(format!("card {} has {n} copies, expected {expected}", cfg.card_from_index(i)));
            }
        }
        if self.info_tokens > cfg.info_tokens || self.life_tokens > cfg.life_tokens {
            return Err("token count out of range".into());
        }
        if self.fireworks.iter().any(|&h| h as usize > cfg.num_ranks) {
            return Err("firework above max rank".into());
        }
        if self.score() > cfg.max_score() {
            return Err("score above maximum".into());
        }
        for p in 0..cfg.num_players {
            if self.hands[p].len() != self.knowledge[p].len() || self.hands[p].len() > cfg.hand_size {
                return Err(format!("hand {p} malformed"));
            }
            for (card, know) in self.hands[p].iter().zip(&self.knowledge[p]) {
                if !know.allows(*card) {
                    return Err(format!("knowledge of player {p} excludes the true card {card}"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn relabel_colors(&self, perm: &[usize]) -> GameState {
        let map_card = |c: &Card| Card::new(perm[c.color as usize] as u8, c.rank);
        let cfg = &*self.config;
        let mut fireworks = vec![0; cfg.num_colors];
        for (c, &h) in self.fireworks.iter().enumerate() {
            fireworks[perm[c]] = h;
        }
        let mut discard = vec![0; cfg.num_card_kinds()];
        for (i, &d) in self.discard.iter().enumerate() {
            discard[cfg.card_index(map_card(&cfg.card_from_index(i)))] = d;
        }
        GameState {
            config: self.config.clone(),
            deck: self.deck.iter().map(map_card).collect(),
            hands: self.hands.iter().map(|h| h.iter().map(map_card).collect()).collect(),
            knowledge: self
                .knowledge
                .iter()
                .map(|ks| ks.iter().map(|k| permute_knowledge(k, perm)).collect())
                .collect(),
            fireworks,
            discard,
            info_tokens: self.info_tokens,
            life_tokens: self.life_tokens,
            current_player: self.current_player,
            turn: self.turn,
            final_round_countdown: self.final_round_countdown,
            last_action: self.last_action.as_ref().map(|l| permute_last_action(l, perm)),
            terminal: self.terminal,
            seed: self.seed,
        }
    }
}

pub(crate) fn permute_mask(mask: u8, perm: &[usize]) -> u8 {
    let mut out = 0u8;
    for (c, &to) in perm.iter().enumerate() {
        if mask & (1 << c) != 0 {
            out |= 1 << to;
        }
    }
    out
}

pub(crate) fn permute_knowledge(k: &SlotKnowledge, perm: &[usize]) -> SlotKnowledge {
    SlotKnowledge { color_mask: permute_mask(k.color_mask, perm), ..*k }
}

pub(crate) fn permute_action(action: Action, perm: &[usize]) -> Action {
    match action {
        Action::HintColor(c) => Action::HintColor(perm[c as usize] as u8),
        other => other,
    }
}

pub(crate) fn permute_last_action(l: &LastAction, perm: &[usize]) -> LastAction {
    LastAction {
        action: permute_action(l.action, perm),
        card: l.card.map(|c| Card::new(perm[c.color as usize] as u8, c.rank)),
        ..l.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a state whose hands are fixed; the deck keeps the rest in canonical order.
    pub(crate) fn rigged(config: GameConfig, hands: [Vec<Card>; 2]) -> GameState {
        let mut state = new_game(&config, 0).unwrap();
        let mut pool = config.full_deck();
        for card in hands.iter().flatten() {
            let pos = pool.iter().position(|c| c == card).expect("card available");
            pool.remove(pos);
        }
        state.deck = pool;
        state.hands = hands.to_vec();
        state
    }

    #[test]
    fn deal_counts() {
        let s = new_game(&GameConfig::default(), 7).unwrap();
        assert_eq!(s.deck_remaining(), 40);
        assert_eq!(s.info_tokens(), 8);
        assert_eq!(s.score(), 0);
        let small = GameConfig { hand_size: 2, num_colors: 2, ..GameConfig::default() };
        assert_eq!(new_game(&small, 3).unwrap().deck_remaining(), 16);
        s.check_invariants().unwrap();
    }

    #[test]
    fn deal_is_deterministic() {
        let a = new_game(&GameConfig::default(), 99).unwrap();
        let b = new_game(&GameConfig::default(), 99).unwrap();
        assert_eq!(a, b);
        let c = new_game(&GameConfig::default(), 100).unwrap();
        assert_ne!(a.deck, c.deck);
    }

    #[test]
    fn oversized_hand_is_config_error() {
        let cfg = GameConfig { hand_size: 30, ..GameConfig::default() };
        assert!(matches!(new_game(&cfg, 0), Err(EngineError::InvalidConfig(_))));
    }

    #[test]
    fn no_discard_at_full_tokens() {
        let s = new_game(&GameConfig::default(), 1).unwrap();
        let legal = s.legal_actions().unwrap();
        assert!(!legal.iter().any(|a| matches!(a, Action::Discard(_))));
        assert!(legal.iter().any(|a| matches!(a, Action::Play(_))));
    }

    #[test]
    fn no_hints_without_tokens() {
        let mut s = new_game(&GameConfig::default(), 1).unwrap();
        s.info_tokens = 0;
        let legal = s.legal_actions().unwrap();
        assert!(!legal.iter().any(|a| a.is_hint()));
        assert!(legal.iter().any(|a| matches!(a, Action::Discard(_))));
    }

    #[test]
    fn hint_must_touch_a_card() {
        let cfg = GameConfig::small();
        let s = rigged(cfg, [vec![Card::new(0, 0), Card::new(0, 1)], vec![Card::new(1, 2), Card::new(1, 3)]]);
        let legal = s.legal_actions().unwrap();
        assert!(!legal.contains(&Action::HintColor(0)));
        assert!(legal.contains(&Action::HintColor(1)));
        assert!(legal.contains(&Action::HintRank(2)));
        assert!(!legal.contains(&Action::HintRank(0)));
        assert!(matches!(s.step(Action::HintColor(0)), Err(EngineError::IllegalAction(_))));
    }

    #[test]
    fn successful_play() {
        let cfg = GameConfig::small();
        let s = rigged(cfg, [vec![Card::new(0, 0), Card::new(0, 1)], vec![Card::new(1, 2), Card::new(1, 3)]]);
        let (next, reward, terminal) = s.step(Action::Play(0)).unwrap();
        assert_eq!(reward, 1.0);
        assert!(!terminal);
        assert_eq!(next.fireworks()[0], 1);
        assert_eq!(next.hand(0).len(), 2);
        assert_eq!(next.hand(0)[0], Card::new(0, 1));
        assert_eq!(next.current_player(), 1);
        next.check_invariants().unwrap();
    }

    #[test]
    fn bomb_out_zeroes_the_score() {
        let cfg = GameConfig::small();
        let mut s = rigged(cfg, [vec![Card::new(0, 3), Card::new(0, 1)], vec![Card::new(1, 2), Card::new(1, 3)]]);
        s.fireworks = vec![2, 5];
        // remove the now "played" cards from the deck to keep conservation
        s.deck.retain(|c| !(c.color == 1 || (c.color == 0 && c.rank < 2)));
        s.life_tokens = 1;
        let before = s.score();
        assert_eq!(before, 7);
        let result = s.apply(Action::Play(0)).unwrap();
        assert!(result.terminal);
        assert_eq!(result.reward, -7.0);
        assert_eq!(s.score(), 0);
    }

    #[test]
    fn completing_a_stack_refunds_a_token() {
        let cfg = GameConfig::small();
        let mut s = rigged(cfg, [vec![Card::new(0, 4), Card::new(0, 1)], vec![Card::new(1, 2), Card::new(1, 3)]]);
        s.fireworks = vec![4, 0];
        s.info_tokens = 5;
        let r = s.apply(Action::Play(0)).unwrap();
        assert_eq!(r.reward, 1.0);
        assert_eq!(s.info_tokens(), 6);
    }

    #[test]
    fn hint_updates_partner_knowledge() {
        let cfg = GameConfig::small();
        let mut s = rigged(cfg, [vec![Card::new(0, 0), Card::new(0, 1)], vec![Card::new(1, 0), Card::new(1, 3)]]);
        s.apply(Action::HintRank(0)).unwrap();
        let k = s.knowledge(1);
        assert!(k[0].rank_hinted);
        assert_eq!(k[0].rank_known(), Some(0));
        assert!(!k[1].rank_hinted);
        assert_eq!(k[1].rank_mask & 1, 0);
        assert_eq!(s.info_tokens(), 7);
        assert_eq!(s.last_action().unwrap().touched, 0b01);
    }

    #[test]
    fn final_round_after_deck_exhaustion() {
        let cfg = GameConfig::small();
        let mut s = new_game(&cfg, 5).unwrap();
        s.info_tokens = 7;
        let last = s.deck.pop().unwrap();
        let keep = s.deck.clone();
        s.deck = vec![last];
        // conservation is not needed here; only countdown mechanics are checked
        s.apply(Action::Discard(0)).unwrap();
        assert_eq!(s.deck_remaining(), 0);
        assert_eq!(s.final_round_countdown(), Some(2));
        assert!(!s.is_terminal());
        s.apply(Action::HintRank(s.hand(0)[0].rank)).unwrap();
        assert_eq!(s.final_round_countdown(), Some(1));
        assert!(!s.is_terminal());
        s.apply(Action::Discard(0)).unwrap();
        assert!(s.is_terminal());
        assert!(matches!(s.legal_actions(), Err(EngineError::GameOver)));
        drop(keep);
    }
}
