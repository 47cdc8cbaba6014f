mod common;

use common::{check_random_game, Violations};
use fsc_core::engine::{encode_observation, encoded_dim, new_game, observe};
use fsc_core::GameConfig;

fn sweep(config: &GameConfig, games: u64) -> Violations {
    let mut v = Violations::default();
    for seed in 0..games {
        v.add(check_random_game(config, seed));
    }
    v
}

#[test]
fn random_games_keep_every_invariant_small() {
    assert_eq!(sweep(&GameConfig::small(), 10_000), Violations::default());
}

#[test]
fn random_games_keep_every_invariant_default() {
    assert_eq!(sweep(&GameConfig::default(), 10_000), Violations::default());
}

/// Block widths counted by hand from the documented layout.
#[test]
fn encoding_width_is_frozen() {
    assert_eq!(encoded_dim(&GameConfig::default()), 462);
    assert_eq!(encoded_dim(&GameConfig::small()), 135);
}

#[test]
fn legal_mask_block_matches_engine() {
    for config in [GameConfig::small(), GameConfig::default()] {
        let (k, n) = (config.hand_size, config.num_colors * config.num_ranks);
        let offset = 2 * k * n + k * (config.num_colors + config.num_ranks) + 4 * k
            + config.num_colors * (config.num_ranks + 1)
            + n
            + config.info_tokens as usize
            + config.life_tokens as usize
            + 2;
        let mut state = new_game(&config, 11).unwrap();
        while !state.is_terminal() {
            let p = state.current_player();
            let enc = encode_observation(&observe(&state, p), &config);
            assert_eq!(enc.len(), encoded_dim(&config));
            let mask: Vec<bool> = enc[offset..offset + config.num_actions()].iter().map(|&x| x == 1.0).collect();
            assert_eq!(mask, state.legal_mask());
            let a = state.legal_actions().unwrap()[0];
            state.apply(a).unwrap();
        }
    }
}
