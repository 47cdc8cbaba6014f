//! Independent reference implementations shared by the integration tests
//! and the acceptance target.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fsc_core::agents::{Architecture, QNetwork};
use fsc_core::engine::{apply_color_permutation, new_game, observe, Card, GameState};
use fsc_core::training::{td_loss, PreparedBatch};
use fsc_core::GameConfig;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- engine

fn card_multiset(config: &GameConfig) -> BTreeMap<(u8, u8), usize> {
    let mut m = BTreeMap::new();
    for c in 0..config.num_colors as u8 {
        for (r, &n) in config.rank_counts.iter().enumerate() {
            m.insert((c, r as u8), n as usize);
        }
    }
    m
}

/// Cards in deck, hands, discard pile and fireworks, as a multiset.
fn located_cards(s: &GameState) -> BTreeMap<(u8, u8), usize> {
    let config = s.config();
    let mut m = BTreeMap::new();
    let mut add = |c: Card| *m.entry((c.color, c.rank)).or_insert(0) += 1;
    s.deck().iter().copied().for_each(&mut add);
    for p in 0..2 {
        s.hand(p).iter().copied().for_each(&mut add);
    }
    for (i, &n) in s.discard_counts().iter().enumerate() {
        let card = Card::new((i / config.num_ranks) as u8, (i % config.num_ranks) as u8);
        for _ in 0..n {
            add(card);
        }
    }
    for (c, &h) in s.fireworks().iter().enumerate() {
        for r in 0..h {
            add(Card::new(c as u8, r));
        }
    }
    m
}

/// Counts of each kind of violation over one random game.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct Violations {
    pub conservation: usize,
    pub reward_sum: usize,
    pub score_bounds: usize,
    pub equivariance: usize,
    pub determinism: usize,
}

impl Violations {
    pub fn total(&self) -> usize {
        self.conservation + self.reward_sum + self.score_bounds + self.equivariance + self.determinism
    }

    pub fn add(&mut self, o: Violations) {
        self.conservation += o.conservation;
        self.reward_sum += o.reward_sum;
        self.score_bounds += o.score_bounds;
        self.equivariance += o.equivariance;
        self.determinism += o.determinism;
    }
}

/// Plays one uniformly random game and checks every engine invariant at
/// every step. Equivariance is checked on a random color permutation: the
/// relabelled state stepped by the relabelled action must equal the
/// relabelled successor, and observations must commute with relabelling.
pub fn check_random_game(config: &GameConfig, seed: u64) -> Violations {
    let mut v = Violations::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut perm: Vec<usize> = (0..config.num_colors).collect();
    perm.shuffle(&mut rng);
    let full = card_multiset(config);
    let max = config.max_score();

    let mut state = new_game(config, seed).unwrap();
    let mut actions = Vec::new();
    let mut reward_sum = 0.0;
    loop {
        if located_cards(&state) != full {
            v.conservation += 1;
        }
        if state.score() > max {
            v.score_bounds += 1;
        }
        let relabelled = apply_color_permutation(&state, &perm, config).unwrap();
        for p in 0..2 {
            let lhs = observe(&relabelled, p);
            let rhs = apply_color_permutation(&observe(&state, p), &perm, config).unwrap();
            if lhs != rhs {
                v.equivariance += 1;
            }
        }
        if state.is_terminal() {
            break;
        }
        let legal = state.legal_actions().unwrap();
        let a = legal[rng.gen_range(0..legal.len())];
        let (next, reward, _) = state.step(a).unwrap();
        let pa = apply_color_permutation(&a, &perm, config).unwrap();
        match relabelled.step(pa) {
            Ok((rn, rr, _)) if rr == reward && rn == apply_color_permutation(&next, &perm, config).unwrap() => {}
            _ => v.equivariance += 1,
        }
        reward_sum += reward;
        actions.push(a);
        state = next;
    }
    if reward_sum != state.score() as f64 {
        v.reward_sum += 1;
    }
    let mut again = new_game(config, seed).unwrap();
    for &a in &actions {
        again.apply(a).unwrap();
    }
    if again != state {
        v.determinism += 1;
    }
    v
}

// ---------------------------------------------------------------- metrics

/// Total regret by literal summation over episodes, in the order written.
pub fn regret_oracle(trace: &[f64], c_star: f64, t: usize) -> (f64, f64) {
    let mut total = 0.0;
    for &c in trace.iter().take(t) {
        total += c_star - c;
    }
    (total, total / t as f64)
}

pub fn diversity_oracle(m: &[Vec<f64>], max_score: f64) -> f64 {
    let n = m.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairs.push(m[i][j] / max_score);
            }
        }
    }
    1.0 - pairs.iter().sum::<f64>() / pairs.len() as f64
}

pub fn strength_oracle(c_stars: &[f64], max_score: f64) -> f64 {
    c_stars.iter().map(|c| c / max_score).sum::<f64>() / c_stars.len() as f64
}

/// Inter-quartile mean by explicit rank selection: keep the values whose
/// rank lies in `[floor(M/4), M - floor(M/4))`.
pub fn iqm_oracle(values: &[f64]) -> f64 {
    let m = values.len();
    let cut = m / 4;
    let mut kept = Vec::new();
    for (i, &x) in values.iter().enumerate() {
        let rank = values.iter().enumerate().filter(|&(j, &y)| y < x || (y == x && j < i)).count();
        if rank >= cut && rank < m - cut {
            kept.push(x);
        }
    }
    kept.iter().sum::<f64>() / kept.len() as f64
}

pub fn perfect_rate_oracle(scores: &[u32], max: u32) -> f64 {
    let mut hits = 0usize;
    for &s in scores {
        if s == max {
            hits += 1;
        }
    }
    hits as f64 / scores.len() as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }
}

// ---------------------------------------------------------------- selection

/// Every `k`-subset of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Brute-force partner selection over agents sorted by id: the first subset
/// (lexicographically) minimising `|D - target|` among those whose members
/// all have self-play strength at least `strength_min`.
pub fn select_oracle(
    ids: &[String],
    m: &[Vec<f64>],
    max_score: f64,
    k: usize,
    strength_min: f64,
    target: f64,
) -> Option<(Vec<String>, f64)> {
    let mut order: Vec<usize> = (0..ids.len()).filter(|&j| m[j][j] / max_score >= strength_min).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut best: Option<(Vec<usize>, f64, f64)> = None;
    for s in subsets(order.len(), k) {
        let members: Vec<usize> = s.iter().map(|&p| order[p]).collect();
        let sub: Vec<Vec<f64>> = members.iter().map(|&i| members.iter().map(|&j| m[i][j]).collect()).collect();
        let d = diversity_oracle(&sub, max_score);
        let dist = (d - target).abs();
        if best.as_ref().is_none_or(|b| dist < b.2) {
            best = Some((members, d, dist));
        }
    }
    best.map(|(members, d, _)| (members.iter().map(|&i| ids[i].clone()).collect(), d))
}

/// A random symmetric score matrix with entries in `[0, max_score]`.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, max_score: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = rng.gen_range(0.3..1.0) * max_score;
        for j in 0..i {
            let v = rng.gen_range(0.0..1.0) * max_score;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

// ---------------------------------------------------------------- gradients

/// A random regression batch in f64: `rows` rows, grouped in pairs when
/// `paired` (value decomposition) and one per group otherwise.
pub fn random_batch(net: &QNetwork, rng: &mut ChaCha8Rng, rows: usize, paired: bool) -> PreparedBatch<f64> {
    let inputs = Array2::from_shape_fn((rows, net.input_dim()), |_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 });
    let actions = (0..rows).map(|_| rng.gen_range(0..net.num_actions())).collect();
    let groups: Vec<usize> = (0..rows).map(|r| if paired { r / 2 } else { r }).collect();
    let num_groups = groups.last().map_or(0, |g| g + 1);
    PreparedBatch {
        inputs,
        actions,
        groups,
        targets: (0..num_groups).map(|_| rng.gen_range(-2.0..3.0)).collect(),
        weights: (0..num_groups).map(|_| rng.gen_range(0.2..1.0)).collect(),
    }
}

fn loss_at(net: &QNetwork, params: &[f64], batch: &PreparedBatch<f64>) -> (f64, Vec<bool>) {
    let cache = net.forward(params, batch.inputs.view());
    let (loss, _, _) = td_loss(net, params, batch);
    (loss, cache.relu_pattern())
}

/// Central differences against the analytic TD-loss gradient at one random
/// point: the eight largest-magnitude coordinates and four random
/// directions. Probes whose perturbation flips any ReLU are skipped.
/// Returns `(worst relative error, probes compared, probes skipped)`.
pub fn gradient_check_point(arch: Architecture, obs_dim: usize, num_actions: usize, rng: &mut ChaCha8Rng) -> (f64, usize, usize) {
    const H: f64 = 1e-4;
    let net = QNetwork::with_dims(arch, obs_dim, num_actions);
    let params: Vec<f64> = net.init_params(rng).iter().map(|&p| p as f64 + rng.gen_range(-0.02..0.02)).collect();
    let paired = rng.gen_bool(0.5);
    let batch = random_batch(&net, rng, 6, paired);
    let (_, grad, _) = td_loss(&net, &params, &batch);
    let (_, pattern) = loss_at(&net, &params, &batch);

    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()));
    let mut directions: Vec<Vec<f64>> = order[..8]
        .iter()
        .map(|&i| {
            let mut d = vec![0.0; params.len()];
            d[i] = 1.0;
            d
        })
        .collect();
    for _ in 0..4 {
        let d: Vec<f64> = (0..params.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        directions.push(d.iter().map(|x| x / norm).collect());
    }

    let (mut worst, mut compared, mut skipped) = (0.0f64, 0, 0);
    for d in directions {
        let shifted = |s: f64| params.iter().zip(&d).map(|(p, x)| p + s * x).collect::<Vec<_>>();
        let evals: Vec<(f64, Vec<bool>)> = [2.0, 1.0, -1.0, -2.0].iter().map(|k| loss_at(&net, &shifted(k * H), &batch)).collect();
        if evals.iter().any(|(_, p)| *p != pattern) {
            skipped += 1;
            continue;
        }
        // Five-point stencil: truncation error is O(H^4).
        let numeric = (-evals[0].0 + 8.0 * evals[1].0 - 8.0 * evals[2].0 + evals[3].0) / (12.0 * H);
        let analytic: f64 = grad.iter().zip(&d).map(|(g, x)| g * x).sum();
        worst = worst.max(rel_err(analytic, numeric));
        compared += 1;
    }
    (worst, compared, skipped)
}
