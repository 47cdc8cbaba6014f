use std::sync::Arc;

use rand::{Rng, RngCore};

use super::network::{masked_argmax, Architecture, QNetwork};
use crate::engine::{Action, ColorSymmetric, GameConfig, History, HistoryEntry};

/// A playable agent. Implementations choose a greedy action; the provided
/// [`Policy::act`] adds epsilon-greedy exploration on top.
pub trait Policy: Send + Sync {
    /// Greedy action index for the newest observation in `history`.
    fn greedy_index(&self, history: &History) -> usize;

    /// Number of past observations the policy looks at.
    fn history_len(&self) -> usize {
        1
    }

    fn describe(&self) -> String;

    /// With probability `epsilon` a uniformly random legal action, otherwise
    /// the greedy one.
    fn act(&self, history: &History, epsilon: f64, rng: &mut dyn RngCore) -> Action {
        let obs = history.latest().expect("history must be nonempty");
        let config = history.config();
        if epsilon > 0.0 && rng.gen_bool(epsilon.min(1.0)) {
            let legal: Vec<usize> = obs.legal_indices().collect();
            return Action::from_index(legal[rng.gen_range(0..legal.len())], config);
        }
        Action::from_index(self.greedy_index(history), config)
    }
}

impl<P: Policy + ?Sized> Policy for Arc<P> {
    fn greedy_index(&self, history: &History) -> usize {
        (**self).greedy_index(history)
    }
    fn history_len(&self) -> usize {
        (**self).history_len()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn act(&self, history: &History, epsilon: f64, rng: &mut dyn RngCore) -> Action {
        (**self).act(history, epsilon, rng)
    }
}

/// Writes the network input for a window of steps into `out`, oldest first.
/// Missing leading steps stay zero. Each step is the observation features
/// followed by a one-hot of the action taken just before it.
pub fn write_window<'a>(
    steps: impl ExactSizeIterator<Item = (&'a [f32], Option<usize>)>,
    history_len: usize,
    obs_dim: usize,
    num_actions: usize,
    out: &mut [f32],
) {
    let step_dim = obs_dim + num_actions;
    debug_assert_eq!(out.len(), history_len * step_dim);
    let n = steps.len().min(history_len);
    let skip = steps.len() - n;
    let pad = history_len - n;
    out[..pad * step_dim].fill(0.0);
    for (i, (features, prev)) in steps.skip(skip).enumerate() {
        let base = (pad + i) * step_dim;
        out[base..base + obs_dim].copy_from_slice(features);
        let actions = &mut out[base + obs_dim..base + step_dim];
        actions.fill(0.0);
        if let Some(a) = prev {
            actions[a] = 1.0;
        }
    }
}

pub fn history_input(history: &History, net: &QNetwork) -> Vec<f32> {
    let mut input = vec![0.0; net.input_dim()];
    let obs_dim = net.step_dim() - net.num_actions();
    write_window(
        history.entries().map(|e: &HistoryEntry| (e.features.as_slice(), e.prev_action)),
        net.architecture().history_len,
        obs_dim,
        net.num_actions(),
        &mut input,
    );
    input
}

/// Greedy policy of a Q-network; illegal actions are masked before the argmax.
#[derive(Clone, Debug)]
pub struct QPolicy {
    net: QNetwork,
    params: Arc<Vec<f32>>,
}

impl QPolicy {
    pub fn new(net: QNetwork, params: Arc<Vec<f32>>) -> Self {
        assert_eq!(net.num_params(), params.len());
        Self { net, params }
    }

    pub fn from_arch(arch: Architecture, config: &GameConfig, params: Vec<f32>) -> Self {
        Self::new(QNetwork::new(arch, config), Arc::new(params))
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn params(&self) -> &Arc<Vec<f32>> {
        &self.params
    }

    pub fn q_values(&self, history: &History) -> Vec<f32> {
        self.net.q_values(&self.params, &history_input(history, &self.net))
    }
}

impl Policy for QPolicy {
    fn greedy_index(&self, history: &History) -> usize {
        let q = self.q_values(history);
        let legal = &history.latest().expect("nonempty history").legal_action_mask;
        masked_argmax(&q, legal).expect("acting without a legal action")
    }

    fn history_len(&self) -> usize {
        self.net.architecture().history_len
    }

    fn describe(&self) -> String {
        format!("q[{}]", self.net.architecture())
    }
}

/// Plays an inner policy in a color-relabelled world. In training mode a
/// fresh permutation is drawn each episode; in evaluation mode the identity
/// is used so the wrapper is transparent.
pub struct OtherPlayWrapper<P> {
    inner: P,
    perm: Vec<usize>,
    inverse: Vec<usize>,
    training: bool,
}

impl<P: Policy> OtherPlayWrapper<P> {
    pub fn new(inner: P, num_colors: usize, training: bool) -> Self {
        let id: Vec<usize> = (0..num_colors).collect();
        Self { inner, perm: id.clone(), inverse: id, training }
    }

    /// Draws the permutation for the next episode.
    pub fn begin_episode(&mut self, rng: &mut dyn RngCore) {
        let n = self.perm.len();
        let mut perm: Vec<usize> = (0..n).collect();
        if self.training {
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
        }
        self.set_permutation(perm);
    }

    pub fn set_permutation(&mut self, perm: Vec<usize>) {
        self.inverse = crate::engine::invert_permutation(&perm);
        self.perm = perm;
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

/// A copy of `history` with every observation and action relabelled.
pub fn relabel_history(history: &History, perm: &[usize]) -> History {
    let config = history.config();
    let mut out = History::new(config, history.capacity());
    for entry in history.entries() {
        if let Some(prev) = entry.prev_action {
            out.record_action(Action::from_index(prev, config).relabel(perm, config).index(config));
        }
        out.push(entry.observation.relabel(perm, config));
    }
    out
}

impl<P: Policy> Policy for OtherPlayWrapper<P> {
    fn greedy_index(&self, history: &History) -> usize {
        let config = history.config();
        let inner_choice = if self.perm.iter().enumerate().all(|(i, &p)| i == p) {
            self.inner.greedy_index(history)
        } else {
            self.inner.greedy_index(&relabel_history(history, &self.perm))
        };
        Action::from_index(inner_choice, config).relabel(&self.inverse, config).index(config)
    }

    fn history_len(&self) -> usize {
        self.inner.history_len()
    }

    fn describe(&self) -> String {
        format!("other-play({})", self.inner.describe())
    }
}
