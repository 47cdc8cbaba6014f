use std::collections::VecDeque;

use super::{encode_observation, encoded_dim, GameConfig, Observation};

/// One observation in a player's history together with the action that
/// player took immediately before it.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry {
    pub observation: Observation,
    pub features: Vec<f32>,
    pub prev_action: Option<usize>,
}

/// The last `capacity` observations of one player, oldest first.
#[derive(Clone, Debug)]
pub struct History {
    config: GameConfig,
    capacity: usize,
    entries: VecDeque<HistoryEntry>,
    last_action: Option<usize>,
}

impl History {
    pub fn new(config: &GameConfig, capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        Self {
            config: config.clone(),
            capacity,
            entries: VecDeque::with_capacity(capacity),
            last_action: None,
        }
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, observation: Observation) {
        let features = encode_observation(&observation, &self.config);
        self.push_encoded(observation, features);
    }

    pub fn push_encoded(&mut self, observation: Observation, features: Vec<f32>) {
        debug_assert_eq!(features.len(), encoded_dim(&self.config));
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        let prev_action = self.last_action.take();
        self.entries.push_back(HistoryEntry { observation, features, prev_action });
    }

    /// Records the action chosen after the newest observation.
    pub fn record_action(&mut self, action_index: usize) {
        self.last_action = Some(action_index);
    }

    pub fn latest(&self) -> Option<&Observation> {
        self.entries.back().map(|e| &e.observation)
    }

    pub fn entries(&self) -> impl DoubleEndedIterator<Item = &HistoryEntry> + ExactSizeIterator {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.last_action = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{new_game, observe};

    #[test]
    fn bounded_and_ordered() {
        let cfg = GameConfig::small();
        let mut s = new_game(&cfg, 1).unwrap();
        let mut h = History::new(&cfg, 2);
        for turn in 0..4 {
            h.push(observe(&s, 0));
            h.record_action(turn);
            let a = s.legal_actions().unwrap()[0];
            s.apply(a).unwrap();
            assert!(h.len() <= 2);
        }
        let prev: Vec<_> = h.entries().map(|e| e.prev_action).collect();
        assert_eq!(prev, vec![Some(1), Some(2)]);
    }
}
