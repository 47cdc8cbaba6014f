use serde::{Deserialize, Serialize};

use super::TrainError;

/// Hyper-parameters of self-play training and of fine-tuning.
///
/// Defaults are the desk-scale values; the large-scale values (a buffer of
/// 100k episodes, 80 threads x 80 games) are reachable through the same fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Capacity of the replay buffer in episodes.
    pub replay_buffer_size: usize,
    pub num_threads: usize,
    pub num_games_per_thread: usize,
    pub gamma: f64,
    /// Actor `i` of `W` explores with `eps_base^(1 + eps_alpha * i / (W - 1))`.
    pub eps_base: f64,
    pub eps_alpha: f64,
    pub target_update_period: usize,
    pub prioritized: bool,
    pub priority_alpha: f64,
    pub priority_beta: f64,
    pub vdn: bool,
    pub other_play: bool,
    pub total_train_episodes: usize,
    pub eval_every: usize,
    pub eval_games: usize,
    /// Sampled transitions per collected transition.
    pub replay_ratio: f64,
    /// Episodes stored before the first gradient step.
    pub burn_in_episodes: usize,
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 6.25e-5,
            batch_size: 128,
            replay_buffer_size: 5_000,
            num_threads: 8,
            num_games_per_thread: 8,
            gamma: 0.99,
            eps_base: 0.4,
            eps_alpha: 7.0,
            target_update_period: 250,
            prioritized: false,
            priority_alpha: 0.9,
            priority_beta: 0.6,
            vdn: false,
            other_play: false,
            total_train_episodes: 250_000,
            eval_every: 10_000,
            eval_games: 200,
            replay_ratio: 4.0,
            burn_in_episodes: 200,
            max_grad_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a finite non-negative number");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.replay_buffer_size < self.batch_size {
            return bad("replay_buffer_size must be at least batch_size");
        }
        if self.num_threads * self.num_games_per_thread == 0 {
            return bad("num_threads x num_games_per_thread must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.eps_base) {
            return bad("eps_base must lie in [0, 1]");
        }
        if self.eval_every == 0 || self.eval_games == 0 {
            return bad("eval_every and eval_games must be positive");
        }
        if self.target_update_period == 0 {
            return bad("target_update_period must be positive");
        }
        if self.replay_ratio < 0.0 || self.max_grad_norm <= 0.0 {
            return bad("replay_ratio must be >= 0 and max_grad_norm > 0");
        }
        Ok(())
    }

    pub fn num_workers(&self) -> usize {
        self.num_threads * self.num_games_per_thread
    }

    /// Exploration rate of actor `worker` out of `num_workers()`.
    pub fn actor_epsilon(&self, worker: usize) -> f64 {
        let w = self.num_workers();
        if w <= 1 {
            return self.eps_base;
        }
        self.eps_base.powf(1.0 + self.eps_alpha * worker as f64 / (w - 1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.lr, 6.25e-5);
        assert_eq!(c.num_workers(), 64);
    }

    #[test]
    fn epsilon_schedule_is_geometric() {
        let c = TrainConfig::default();
        assert!((c.actor_epsilon(0) - 0.4).abs() < 1e-12);
        assert!((c.actor_epsilon(63) - 0.4f64.powi(8)).abs() < 1e-12);
        for w in 1..64 {
            assert!(c.actor_epsilon(w) < c.actor_epsilon(w - 1));
        }
    }

    #[test]
    fn rejects_zero_workers() {
        let c = TrainConfig { num_threads: 0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
    }
}
