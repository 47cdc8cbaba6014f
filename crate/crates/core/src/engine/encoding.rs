//! Fixed-length feature vector for an [`Observation`].
//!
//! Blocks, in order (K = hand size, C = colors, R = ranks, N = C*R, A = actions):
//!
//! | block                          | width      |
//! |--------------------------------|------------|
//! | partner hand one-hots          | K*N        |
//! | partner knowledge color/rank   | K*(C+R)    |
//! | partner card playable/dead     | K*2        |
//! | own candidate identities       | K*N        |
//! | own slot P(playable)/P(dead)   | K*2        |
//! | firework height one-hots       | C*(R+1)    |
//! | discarded fraction per card    | N          |
//! | info tokens thermometer        | info_tokens|
//! | life tokens thermometer        | life_tokens|
//! | deck remaining fraction        | 1          |
//! | viewer to act                  | 1          |
//! | legal action mask              | A          |
//! | last action present/by partner | 2          |
//! | last action one-hot            | A          |
//! | last play success/failure      | 2          |
//! | last revealed card             | N          |
//! | last hint touched slots        | K          |
//!
//! Missing hand slots (late game) encode as zeros. Changing this layout must
//! bump [`ENCODING_VERSION`].

use super::analysis::{is_dead, is_playable, slot_odds, unseen_counts};
use super::{GameConfig, Observation};

pub const ENCODING_VERSION: u32 = 1;

/// Width of [`encode_observation`]'s output for `config`.
pub fn encoded_dim(config: &GameConfig) -> usize {
    let k = config.hand_size;
    let c = config.num_colors;
    let r = config.num_ranks;
    let n = c * r;
    let a = config.num_actions();
    k * n + k * (c + r) + 2 * k + k * n + 2 * k + c * (r + 1) + n
        + config.info_tokens as usize
        + config.life_tokens as usize
        + 2
        + a
        + 2
        + a
        + 2
        + n
        + k
}

pub fn encode_observation(obs: &Observation, config: &GameConfig) -> Vec<f32> {
    let mut out = vec![0.0; encoded_dim(config)];
    encode_into(obs, config, &mut out);
    out
}

/// Writes the encoding into `out`, which must be zeroed and `encoded_dim` long.
pub fn encode_into(obs: &Observation, config: &GameConfig, out: &mut [f32]) {
    debug_assert_eq!(out.len(), encoded_dim(config));
    let k = config.hand_size;
    let c = config.num_colors;
    let r = config.num_ranks;
    let n = c * r;
    let a = config.num_actions();
    let mut w = Writer { out, pos: 0 };

    let block = w.take(k * n);
    for (slot, card) in obs.partner_hand.iter().enumerate() {
        block[slot * n + config.card_index(*card)] = 1.0;
    }

    let block = w.take(k * (c + r));
    for (slot, know) in obs.partner_knowledge.iter().enumerate() {
        let base = slot * (c + r);
        for color in 0..c {
            if know.color_mask & (1 << color) != 0 {
                block[base + color] = 1.0;
            }
        }
        for rank in 0..r {
            if know.rank_mask & (1 << rank) != 0 {
                block[base + c + rank] = 1.0;
            }
        }
    }

    let block = w.take(2 * k);
    for (slot, card) in obs.partner_hand.iter().enumerate() {
        if is_playable(*card, &obs.fireworks) {
            block[2 * slot] = 1.0;
        } else if is_dead(*card, &obs.fireworks, &obs.discard, config) {
            block[2 * slot + 1] = 1.0;
        }
    }

    let unseen = unseen_counts(obs, config);
    let block = w.take(k * n);
    for (slot, know) in obs.own_knowledge.iter().enumerate() {
        for (i, &u) in unseen.iter().enumerate() {
            if u > 0 && know.allows(config.card_from_index(i)) {
                block[slot * n + i] = 1.0;
            }
        }
    }

    let block = w.take(2 * k);
    for (slot, know) in obs.own_knowledge.iter().enumerate() {
        let (p, d) = slot_odds(know, &unseen, &obs.fireworks, &obs.discard, config);
        block[2 * slot] = p;
        block[2 * slot + 1] = d;
    }

    let block = w.take(c * (r + 1));
    for (color, &h) in obs.fireworks.iter().enumerate() {
        block[color * (r + 1) + h as usize] = 1.0;
    }

    let block = w.take(n);
    for (i, &d) in obs.discard.iter().enumerate() {
        block[i] = d as f32 / config.copies(config.card_from_index(i)) as f32;
    }

    let block = w.take(config.info_tokens as usize);
    block[..obs.info_tokens_left as usize].fill(1.0);
    let block = w.take(config.life_tokens as usize);
    block[..obs.life_tokens_left as usize].fill(1.0);

    let block = w.take(2);
    let dealt = config.hand_size * config.num_players;
    block[0] = obs.deck_remaining as f32 / (config.deck_size() - dealt).max(1) as f32;
    block[1] = if obs.viewer == obs.current_player { 1.0 } else { 0.0 };

    let block = w.take(a);
    for (i, &legal) in obs.legal_action_mask.iter().enumerate() {
        if legal {
            block[i] = 1.0;
        }
    }

    let present = w.take(2);
    if let Some(last) = &obs.last_action {
        present[0] = 1.0;
        if last.actor != obs.viewer {
            present[1] = 1.0;
        }
        let block = w.take(a);
        block[last.action.index(config)] = 1.0;
        let block = w.take(2);
        match last.success {
            Some(true) => block[0] = 1.0,
            Some(false) => block[1] = 1.0,
            None => {}
        }
        let block = w.take(n);
        if let Some(card) = last.card {
            block[config.card_index(card)] = 1.0;
        }
        let block = w.take(k);
        for (slot, v) in block.iter_mut().enumerate() {
            if last.touched & (1 << slot) != 0 {
                *v = 1.0;
            }
        }
    } else {
        w.take(a + 2 + n + k);
    }
    debug_assert_eq!(w.pos, w.out.len());
}

struct Writer<'a> {
    out: &'a mut [f32],
    pos: usize,
}

impl Writer<'_> {
    fn take(&mut self, len: usize) -> &mut [f32] {
        let start = self.pos;
        self.pos += len;
        &mut self.out[start..self.pos]
    }
}
