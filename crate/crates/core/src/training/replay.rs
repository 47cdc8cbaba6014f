//! Episode-level replay storage with transition-level sampling.
//!
//! Episodes live in a ring of fixed capacity and are evicted oldest first in
//! both sampling modes. Sampling is two-level: an episode is drawn with
//! probability proportional to its total weight (its transition count in
//! uniform mode, the sum of its priorities^alpha in prioritized mode), then
//! a transition inside it proportional to its own weight. Together this is
//! exactly uniform (resp. priority-proportional) over all stored transitions.

use rand::Rng;

use super::TrainError;

/// The turns one seat took during an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub seat: usize,
    /// `turns x obs_dim` encoded observations, one per own turn.
    pub obs: Vec<f32>,
    pub actions: Vec<u16>,
    /// `turns x num_actions` legality of each action at each own turn.
    pub legal: Vec<bool>,
    /// Reward collected from each own turn until the next one.
    pub rewards: Vec<f32>,
}

impl Track {
    pub fn new(seat: usize) -> Self {
        Self { seat, obs: Vec::new(), actions: Vec::new(), legal: Vec::new(), rewards: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// Index of the actor that produced the episode.
    pub worker_id: usize,
    /// Stored seats; both in self-play, only the learner's in fine-tuning.
    pub tracks: Vec<Track>,
    /// Reward of every turn of the game in order, both seats.
    pub turn_rewards: Vec<f32>,
    pub score: u32,
}

impl Episode {
    /// Transitions contributed to the buffer: one per stored own turn.
    pub fn num_transitions(&self) -> usize {
        self.tracks.iter().map(Track::len).sum()
    }

    /// Maps a flat transition index to `(track, turn)`.
    pub fn locate(&self, mut index: usize) -> (usize, usize) {
        for (t, track) in self.tracks.iter().enumerate() {
            if index < track.len() {
                return (t, index);
            }
            index -= track.len();
        }
        panic!("transition index out of range");
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Uniform,
    /// Probability proportional to priority^alpha.
    Prioritized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledTransition {
    /// Ring slot of the episode.
    pub slot: usize,
    pub transition: usize,
    /// Importance-sampling correction, 1.0 in uniform mode.
    pub weight: f64,
}

/// Binary tree of partial sums over a fixed number of leaves.
#[derive(Clone, Debug)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(leaves: usize) -> Self {
        let leaves = leaves.next_power_of_two();
        Self { leaves, nodes: vec![0.0; 2 * leaves] }
    }

    fn set(&mut self, leaf: usize, value: f64) {
        let mut i = leaf + self.leaves;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Leaf whose cumulative range contains `mass`, for `0 <= mass < total`.
    fn find(&self, mut mass: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            if mass < left || self.nodes[2 * i + 1] <= 0.0 {
                i *= 2;
            } else {
                mass -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }
}

pub struct ReplayBuffer {
    capacity: usize,
    mode: SampleMode,
    alpha: f64,
    slots: Vec<Option<Episode>>,
    /// priority^alpha per transition, per slot.
    weights: Vec<Vec<f64>>,
    tree: SumTree,
    next: usize,
    len: usize,
    total_added: u64,
    max_priority: f64,
    transitions: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, mode: SampleMode, alpha: f64) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            mode,
            alpha,
            slots: vec![None; capacity],
            weights: vec![Vec::new(); capacity],
            tree: SumTree::new(capacity),
            next: 0,
            len: 0,
            total_added: 0,
            max_priority: 1.0,
            transitions: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions
    }

    pub fn total_added(&self) -> u64 {
        self.total_added
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    pub fn episode(&self, slot: usize) -> &Episode {
        self.slots[slot].as_ref().expect("sampled slot is occupied")
    }

    /// Stored episodes from oldest to newest.
    pub fn episodes_in_order(&self) -> impl Iterator<Item = &Episode> {
        let start = if self.len < self.capacity { 0 } else { self.next };
        (0..self.len).map(move |i| self.slots[(start + i) % self.capacity].as_ref().unwrap())
    }

    /// Appends an episode, evicting the oldest one when full.
    pub fn push(&mut self, episode: Episode) {
        let slot = self.next;
        if let Some(old) = self.slots[slot].take() {
            self.transitions -= old.num_transitions();
            self.len -= 1;
        }
        let n = episode.num_transitions();
        let w = match self.mode {
            SampleMode::Uniform => vec![1.0; n],
            SampleMode::Prioritized => vec![self.max_priority.powf(self.alpha); n],
        };
        self.tree.set(slot, w.iter().sum());
        self.weights[slot] = w;
        self.slots[slot] = Some(episode);
        self.transitions += n;
        self.len += 1;
        self.total_added += 1;
        self.next = (slot + 1) % self.capacity;
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<Vec<SampledTransition>, TrainError> {
        if self.transitions < batch_size || self.transitions == 0 {
            return Err(TrainError::UnderfullBuffer { have: self.transitions, need: batch_size.max(1) });
        }
        let total = self.tree.total();
        let mut out = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let slot = self.tree.find(rng.gen::<f64>() * total);
            let w = &self.weights[slot];
            let mut mass = rng.gen::<f64>() * w.iter().sum::<f64>();
            let mut transition = w.len() - 1;
            for (i, &x) in w.iter().enumerate() {
                if mass < x {
                    transition = i;
                    break;
                }
                mass -= x;
            }
            let weight = match self.mode {
                SampleMode::Uniform => 1.0,
                SampleMode::Prioritized => {
                    let p = w[transition] / total;
                    (self.transitions as f64 * p).powf(-beta)
                }
            };
            out.push(SampledTransition { slot, transition, weight });
        }
        if self.mode == SampleMode::Prioritized {
            let max_w = out.iter().map(|s| s.weight).fold(0.0, f64::max);
            for s in &mut out {
                s.weight /= max_w;
            }
        }
        Ok(out)
    }

    /// Sets new priorities (e.g. absolute TD errors) for sampled transitions.
    pub fn update_priorities(&mut self, sampled: &[SampledTransition], priorities: &[f64]) {
        if self.mode != SampleMode::Prioritized {
            return;
        }
        for (s, &p) in sampled.iter().zip(priorities) {
            let p = p.max(1e-6);
            self.max_priority = self.max_priority.max(p);
            self.weights[s.slot][s.transition] = p.powf(self.alpha);
        }
        for s in sampled {
            self.tree.set(s.slot, self.weights[s.slot].iter().sum());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn fake_episode(worker_id: usize, turns: usize) -> Episode {
        let mut t = Track::new(0);
        for i in 0..turns {
            t.obs.push(i as f32);
            t.actions.push(i as u16);
            t.legal.push(true);
            t.rewards.push(0.0);
        }
        Episode { worker_id, tracks: vec![t], turn_rewards: vec![0.0; turns], score: 0 }
    }

    #[test]
    fn fifo_eviction_and_capacity() {
        let mut buf = ReplayBuffer::new(3, SampleMode::Uniform, 1.0);
        for i in 0..7 {
            buf.push(fake_episode(i, 2));
            assert!(buf.len() <= 3);
        }
        let ids: Vec<usize> = buf.episodes_in_order().map(|e| e.worker_id).collect();
        assert_eq!(ids, vec![4, 5, 6]);
        assert_eq!(buf.num_transitions(), 6);
    }

    #[test]
    fn underfull_buffer_errors() {
        let mut buf = ReplayBuffer::new(3, SampleMode::Uniform, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample(1, 0.0, &mut rng), Err(TrainError::UnderfullBuffer { .. })));
        buf.push(fake_episode(0, 2));
        assert!(buf.sample(3, 0.0, &mut rng).is_err());
        assert!(buf.sample(2, 0.0, &mut rng).is_ok());
    }

    #[test]
    fn single_episode_full_batch_covers_it() {
        let mut buf = ReplayBuffer::new(4, SampleMode::Uniform, 1.0);
        buf.push(fake_episode(0, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = buf.sample(5, 0.0, &mut rng).unwrap();
        assert!(batch.iter().all(|s| s.slot == 0 && s.transition < 5 && s.weight == 1.0));
    }

    #[test]
    fn sum_tree_find() {
        let mut t = SumTree::new(5);
        for (i, v) in [1.0, 0.0, 2.0, 3.0, 0.5].iter().enumerate() {
            t.set(i, *v);
        }
        assert_eq!(t.total(), 6.5);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.9), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(6.4), 4);
    }
}
