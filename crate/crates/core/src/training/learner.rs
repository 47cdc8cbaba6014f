use ndarray::Array2;
use rand::Rng;

use super::actor::track_window;
use super::replay::{Episode, ReplayBuffer, SampleMode, SampledTransition};
use super::{TrainConfig, TrainError};
use crate::agents::network::NetFloat;
use crate::agents::{masked_argmax, QNetwork};

/// Q-values of one agent at the successor history of a transition.
#[derive(Clone, Copy, Debug)]
pub struct NextAgent<'a> {
    pub online: &'a [f32],
    pub target: &'a [f32],
    pub legal: &'a [bool],
}

/// Double-Q target: the online network picks the successor action among the
/// legal ones, the target network values it. With several successor agents
/// (value decomposition) their values are summed. No successors means the
/// transition is terminal and the target is the reward.
pub fn td_target(reward: f64, gamma: f64, next: &[NextAgent]) -> f64 {
    let bootstrap: f64 = next
        .iter()
        .map(|n| {
            let a = masked_argmax(n.online, n.legal).expect("successor without a legal action");
            n.target[a] as f64
        })
        .sum();
    reward + gamma * bootstrap
}

/// Joint action value of a team as the sum of its members' values.
pub fn joint_q_vdn(q: &[f64]) -> f64 {
    q.iter().sum()
}

/// A batch of TD regression problems. Each group is one sampled transition;
/// its rows are the agents whose selected Q-values are summed to form the
/// regressed value (one row for independent learners, up to two for VDN).
#[derive(Clone, Debug)]
pub struct PreparedBatch<F> {
    pub inputs: Array2<F>,
    pub actions: Vec<usize>,
    pub groups: Vec<usize>,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl<F: NetFloat> PreparedBatch<F> {
    pub fn num_groups(&self) -> usize {
        self.targets.len()
    }

    pub fn cast<G: NetFloat>(&self) -> PreparedBatch<G> {
        PreparedBatch {
            inputs: self.inputs.mapv(|v| G::from_f64(v.to_f64().unwrap()).unwrap()),
            actions: self.actions.clone(),
            groups: self.groups.clone(),
            targets: self.targets.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// Weighted half squared TD error averaged over groups, and its derivative
/// with respect to every row's selected Q-value. Rows only receive gradient
/// through their own group's error.
pub fn group_td_gradient(selected: &[f64], groups: &[usize], targets: &[f64], weights: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let b = targets.len();
    let mut joint = vec![0.0; b];
    for (&q, &g) in selected.iter().zip(groups) {
        joint[g] += q;
    }
    let errors: Vec<f64> = joint.iter().zip(targets).map(|(q, y)| q - y).collect();
    let loss = errors.iter().zip(weights).map(|(e, w)| 0.5 * w * e * e).sum::<f64>() / b as f64;
    let dq = groups.iter().map(|&g| weights[g] * errors[g] / b as f64).collect();
    (loss, dq, errors)
}

/// TD loss of `batch` under `params` with fixed targets, its gradient, and the
/// per-group TD errors.
pub fn td_loss<F: NetFloat>(net: &QNetwork, params: &[F], batch: &PreparedBatch<F>) -> (f64, Vec<F>, Vec<f64>) {
    let cache = net.forward(params, batch.inputs.view());
    let selected: Vec<f64> =
        batch.actions.iter().enumerate().map(|(r, &a)| cache.q[[r, a]].to_f64().unwrap()).collect();
    let (loss, dsel, errors) = group_td_gradient(&selected, &batch.groups, &batch.targets, &batch.weights);
    let mut dq = Array2::<F>::zeros(cache.q.raw_dim());
    for (r, (&a, &d)) in batch.actions.iter().zip(&dsel).enumerate() {
        dq[[r, a]] = F::from_f64(d).unwrap();
    }
    let grad = net.backward(params, &cache, dq.view());
    (loss, grad, errors)
}

/// Agents taking part in a sampled transition: `(track, own turn)` pairs for
/// the acting agents and for their successors.
fn transition_agents(ep: &Episode, transition: usize, vdn: bool) -> (Vec<(usize, usize)>, Vec<(usize, usize)>, f64) {
    if !vdn {
        let (t, i) = ep.locate(transition);
        let track = &ep.tracks[t];
        let next = if i + 1 < track.len() { vec![(t, i + 1)] } else { Vec::new() };
        return (vec![(t, i)], next, track.rewards[i] as f64);
    }
    let turns = ep.turn_rewards.len();
    let at = |g: usize| {
        let seat = g % 2;
        let t = ep.tracks.iter().position(|tr| tr.seat == seat).expect("value decomposition needs both seats");
        (t, g / 2)
    };
    let g = transition;
    let cur: Vec<_> = (g..(g + 2).min(turns)).map(at).collect();
    let next: Vec<_> = ((g + 2)..(g + 4).min(turns)).map(at).collect();
    let reward = ep.turn_rewards[g..(g + 2).min(turns)].iter().map(|&r| r as f64).sum();
    (cur, next, reward)
}

/// Builds the regression batch for `samples`, evaluating successor values with
/// the online and target parameters.
pub fn build_batch(
    net: &QNetwork,
    online: &[f32],
    target: &[f32],
    buffer: &ReplayBuffer,
    samples: &[SampledTransition],
    gamma: f64,
    vdn: bool,
) -> PreparedBatch<f32> {
    let input_dim = net.input_dim();
    let num_actions = net.num_actions();
    let mut cur_rows = Vec::new();
    let mut actions = Vec::new();
    let mut groups = Vec::new();
    let mut next_rows = Vec::new();
    let mut next_legal: Vec<&[bool]> = Vec::new();
    let mut next_groups = Vec::new();
    let mut rewards = Vec::with_capacity(samples.len());
    let mut buf = vec![0.0f32; input_dim];
    for (gi, s) in samples.iter().enumerate() {
        let ep = buffer.episode(s.slot);
        let (cur, next, reward) = transition_agents(ep, s.transition, vdn);
        for (t, i) in cur {
            track_window(&ep.tracks[t], i, net, &mut buf);
            cur_rows.extend_from_slice(&buf);
            actions.push(ep.tracks[t].actions[i] as usize);
            groups.push(gi);
        }
        for (t, i) in next {
            track_window(&ep.tracks[t], i, net, &mut buf);
            next_rows.extend_from_slice(&buf);
            next_legal.push(&ep.tracks[t].legal[i * num_actions..(i + 1) * num_actions]);
            next_groups.push(gi);
        }
        rewards.push(reward);
    }

    let mut successors: Vec<Vec<NextAgent>> = vec![Vec::new(); samples.len()];
    let n_next = next_groups.len();
    let (q_online, q_target) = if n_next > 0 {
        let inputs = Array2::from_shape_vec((n_next, input_dim), next_rows).unwrap();
        (net.forward(online, inputs.view()).q, net.forward(target, inputs.view()).q)
    } else {
        (Array2::zeros((0, num_actions)), Array2::zeros((0, num_actions)))
    };
    for (r, &g) in next_groups.iter().enumerate() {
        successors[g].push(NextAgent {
            online: q_online.row(r).to_slice().unwrap(),
            target: q_target.row(r).to_slice().unwrap(),
            legal: next_legal[r],
        });
    }
    let targets = rewards.iter().zip(&successors).map(|(&r, next)| td_target(r, gamma, next)).collect();
    PreparedBatch {
        inputs: Array2::from_shape_vec((groups.len(), input_dim), cur_rows).unwrap(),
        actions,
        groups,
        targets,
        weights: samples.iter().map(|s| s.weight).collect(),
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, num_params: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f32]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let g = g as f64;
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let update = self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            *p -= update as f32;
        }
    }
}

/// Online and target networks plus optimizer state.
pub struct Learner {
    net: QNetwork,
    online: Vec<f32>,
    target: Vec<f32>,
    adam: Adam,
    steps: u64,
    gamma: f64,
    batch_size: usize,
    target_update_period: u64,
    max_grad_norm: f64,
    priority_beta: f64,
    vdn: bool,
}

impl Learner {
    pub fn new(net: QNetwork, params: Vec<f32>, tconfig: &TrainConfig, vdn: bool) -> Self {
        assert_eq!(params.len(), net.num_params());
        Self {
            adam: Adam::new(tconfig.lr, params.len()),
            target: params.clone(),
            online: params,
            net,
            steps: 0,
            gamma: tconfig.gamma,
            batch_size: tconfig.batch_size,
            target_update_period: tconfig.target_update_period as u64,
            max_grad_norm: tconfig.max_grad_norm,
            priority_beta: tconfig.priority_beta,
            vdn,
        }
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn online(&self) -> &[f32] {
        &self.online
    }

    pub fn target(&self) -> &[f32] {
        &self.target
    }

    pub fn into_params(self) -> Vec<f32> {
        self.online
    }

    /// Gradient steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One sampled gradient step; returns the batch loss.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &mut ReplayBuffer, rng: &mut R) -> Result<f64, TrainError> {
        let samples = buffer.sample(self.batch_size, self.priority_beta, rng)?;
        let batch = build_batch(&self.net, &self.online, &self.target, buffer, &samples, self.gamma, self.vdn);
        let (loss, mut grad, errors) = td_loss(&self.net, &self.online, &batch);
        let norm = grad.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
        if norm > self.max_grad_norm {
            let scale = (self.max_grad_norm / norm) as f32;
            grad.iter_mut().for_each(|g| *g *= scale);
        }
        self.adam.step(&mut self.online, &grad);
        if buffer.mode() == SampleMode::Prioritized {
            let priorities: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
            buffer.update_priorities(&samples, &priorities);
        }
        self.steps += 1;
        if self.steps % self.target_update_period == 0 {
            self.target.copy_from_slice(&self.online);
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_q_target_examples() {
        assert_eq!(td_target(1.0, 0.99, &[]), 1.0);
        let next = [NextAgent { online: &[1.0, 3.0], target: &[5.0, 2.0], legal: &[true, true] }];
        assert!((td_target(0.0, 0.99, &next) - 1.98).abs() < 1e-12);
        assert_eq!(td_target(0.7, 0.0, &next), 0.7);
        let masked = [NextAgent { online: &[1.0, 3.0], target: &[5.0, 2.0], legal: &[true, false] }];
        assert!((td_target(0.0, 0.5, &masked) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn joint_value_is_sum() {
        assert_eq!(joint_q_vdn(&[2.0, 3.5]), 5.5);
        assert_eq!(joint_q_vdn(&[0.0, 4.0]), 4.0);
    }

    #[test]
    fn vdn_gradient_is_shared_and_iql_is_independent() {
        let (_, dq, _) = group_td_gradient(&[2.0, 3.5], &[0, 0], &[4.5], &[1.0]);
        assert_eq!(dq, vec![1.0, 1.0]);
        let (_, a, _) = group_td_gradient(&[2.0, 3.5], &[0, 1], &[1.0, 1.0], &[1.0, 1.0]);
        let (_, b, _) = group_td_gradient(&[2.0, 9.0], &[0, 1], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::new(0.1, 2);
        let mut p = vec![1.0f32, 1.0];
        adam.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] - 1.1).abs() < 1e-6);
    }
}
