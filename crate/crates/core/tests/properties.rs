mod common;

use common::{diversity_oracle, gradient_check_point, regret_oracle, rel_err};
use fsc_core::agents::{enumerate_architectures, Architecture, QNetwork};
use fsc_core::metrics::{adaptation_regret, aggregate, diversity, expand_trace, iqm, regret_curve, strength, Aggregator};
use fsc_core::training::{
    collect_round, ActorSetup, Episode, EpisodeSpec, Learner, ReplayBuffer, SampleMode, TrainConfig,
};
use fsc_core::GameConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0..10.0f64, n), n)
}

fn matrix_and_perm() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..9).prop_flat_map(|n| (square(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle()))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    rel_err(a, b) <= tol || (a - b).abs() <= tol
}

proptest! {
    #[test]
    fn diversity_ignores_agent_order((m, perm) in matrix_and_perm()) {
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| m[i][j]).collect()).collect();
        let a = diversity(&m, 10.0).unwrap();
        let b = diversity(&permuted, 10.0).unwrap();
        prop_assert!(close(a, b, 1e-12));
        prop_assert!(close(a, diversity_oracle(&m, 10.0), 1e-12));
    }

    #[test]
    fn strength_ignores_partner_order(mut c in proptest::collection::vec(0.0..10.0f64, 1..12)) {
        let (_, a) = strength(&c, 10.0).unwrap();
        c.reverse();
        let (_, b) = strength(&c, 10.0).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn aggregating_identical_curves_returns_the_curve(
        curve in proptest::collection::vec(0.0..10.0f64, 1..30),
        copies in 1usize..12,
    ) {
        let curves = vec![curve.clone(); copies];
        for mode in [Aggregator::Mean, Aggregator::Iqm] {
            let agg = aggregate(&curves, mode).unwrap();
            for (a, c) in agg.iter().zip(&curve) {
                prop_assert!(close(*a, *c, 1e-13));
            }
        }
    }

    #[test]
    fn iqm_lies_within_the_range(values in proptest::collection::vec(-5.0..5.0f64, 1..40)) {
        let v = iqm(&values).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn regret_shift_identity(
        trace in proptest::collection::vec(0.0..10.0f64, 1..200),
        c1 in 0.0..10.0f64,
        c2 in 0.0..10.0f64,
    ) {
        let t = trace.len();
        let (r1, a1) = adaptation_regret(&trace, c1, t).unwrap();
        let (r2, a2) = adaptation_regret(&trace, c2, t).unwrap();
        prop_assert!((r1 - r2 - t as f64 * (c1 - c2)).abs() <= 1e-9 * (1.0 + r1.abs() + r2.abs()));
        prop_assert!((a1 - a2 - (c1 - c2)).abs() <= 1e-9 * (1.0 + a1.abs() + a2.abs()));
    }

    #[test]
    fn regret_curve_agrees_with_pointwise_regret(
        trace in proptest::collection::vec(0.0..10.0f64, 1..100),
        c in 0.0..10.0f64,
    ) {
        let curve = regret_curve(&trace, c);
        for (i, &(total, avg)) in curve.iter().enumerate() {
            let (ot, oa) = regret_oracle(&trace, c, i + 1);
            prop_assert!(close(total, ot, 1e-9) && close(avg, oa, 1e-9));
        }
    }

    #[test]
    fn expanded_trace_is_latest_evaluation(
        gaps in proptest::collection::vec(1usize..50, 0..8),
        values in proptest::collection::vec(0.0..10.0f64, 9),
        horizon in 1usize..300,
    ) {
        let mut points = vec![(0usize, values[0])];
        for (i, g) in gaps.iter().enumerate() {
            let e = points.last().unwrap().0 + g;
            points.push((e, values[i + 1]));
        }
        let trace = expand_trace(&points, horizon).unwrap();
        prop_assert_eq!(trace.len(), horizon);
        for (t, &v) in trace.iter().enumerate() {
            let latest = points.iter().rev().find(|p| p.0 <= t).unwrap();
            prop_assert_eq!(v, latest.1);
        }
    }

    #[test]
    fn buffer_is_bounded_and_fifo(capacity in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity, SampleMode::Uniform, 1.0);
        for i in 0..pushes {
            buf.push(synthetic_episode(i, 1 + i % 5));
            prop_assert!(buf.len() <= capacity);
        }
        let kept: Vec<usize> = buf.episodes_in_order().map(|e| e.worker_id).collect();
        let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
        prop_assert_eq!(kept, expected);
        prop_assert_eq!(buf.total_added(), pushes as u64);
    }
}

fn synthetic_episode(id: usize, turns: usize) -> Episode {
    let mut track = fsc_core::training::Track::new(0);
    for i in 0..turns {
        track.obs.push(i as f32);
        track.actions.push(0);
        track.legal.push(true);
        track.rewards.push(0.0);
    }
    Episode { worker_id: id, tracks: vec![track], turn_rewards: vec![0.0; turns], score: 0 }
}

/// Upper 0.999 quantile of chi-square with `df` degrees of freedom
/// (Wilson-Hilferty).
fn chi2_critical(df: f64) -> f64 {
    let z = 3.090_232;
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Chi-square statistic of transition counts against uniform over transitions.
fn uniformity_statistic(buf: &ReplayBuffer, draws: usize, seed: u64) -> (f64, f64) {
    let mut counts = vec![vec![0usize; 0]; buf.capacity()];
    for slot in 0..buf.capacity() {
        counts[slot] = vec![0; buf.episode(slot).num_transitions()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = 50;
    for _ in 0..draws / batch {
        for s in buf.sample(batch, 0.4, &mut rng).unwrap() {
            counts[s.slot][s.transition] += 1;
        }
    }
    let n = buf.num_transitions() as f64;
    let expected = draws as f64 / n;
    let stat = counts.iter().flatten().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    (stat, chi2_critical(n - 1.0))
}

fn varied_buffer(mode: SampleMode, alpha: f64) -> ReplayBuffer {
    let mut buf = ReplayBuffer::new(12, mode, alpha);
    for i in 0..12 {
        buf.push(synthetic_episode(i, 1 + (i * 7) % 9));
    }
    buf
}

#[test]
fn uniform_sampling_is_uniform_over_transitions() {
    let buf = varied_buffer(SampleMode::Uniform, 1.0);
    let (stat, critical) = uniformity_statistic(&buf, 200_000, 1);
    assert!(stat < critical, "chi-square {stat} exceeds {critical}");
}

#[test]
fn prioritized_with_zero_alpha_is_uniform() {
    let mut buf = varied_buffer(SampleMode::Prioritized, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sampled = buf.sample(60, 0.4, &mut rng).unwrap();
    let priorities: Vec<f64> = (0..sampled.len()).map(|i| 0.01 + (i % 13) as f64).collect();
    buf.update_priorities(&sampled, &priorities);
    let resampled = buf.sample(50, 0.4, &mut rng).unwrap();
    assert!(resampled.iter().all(|s| s.weight == 1.0));
    let (stat, critical) = uniformity_statistic(&buf, 200_000, 2);
    assert!(stat < critical, "chi-square {stat} exceeds {critical}");
}

#[test]
fn target_network_lags_by_the_update_period() {
    let config = GameConfig::small();
    let arch = Architecture::default();
    let net = QNetwork::new(arch, &config);
    let params = net.init_params(&mut ChaCha8Rng::seed_from_u64(4));
    let setup = ActorSetup { config: &config, net: &net, params: &params, partner: None, other_play: false };
    let specs: Vec<EpisodeSpec> =
        (0..40).map(|i| EpisodeSpec { worker_id: i, seed: i as u64, epsilon: 0.5, learner_seat: 0 }).collect();
    let mut buf = ReplayBuffer::new(64, SampleMode::Uniform, 1.0);
    for e in collect_round(&setup, &specs, 1).unwrap() {
        buf.push(e);
    }
    let tconfig = TrainConfig { lr: 1e-3, batch_size: 16, target_update_period: 3, ..TrainConfig::default() };
    let mut learner = Learner::new(net.clone(), params.clone(), &tconfig, false);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut synced = params.clone();
    for step in 1..=10u64 {
        learner.train_step(&mut buf, &mut rng).unwrap();
        if step % 3 == 0 {
            synced = learner.online().to_vec();
        }
        assert_eq!(learner.target(), synced.as_slice(), "step {step}");
        assert_ne!(learner.online(), params.as_slice());
    }
}

#[test]
fn td_gradients_match_finite_differences() {
    let config = GameConfig::small();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for arch in enumerate_architectures() {
        for _ in 0..3 {
            let (worst, compared, _) = gradient_check_point(arch, 24, config.num_actions(), &mut rng);
            assert!(compared > 0);
            assert!(worst <= 1e-4, "{arch:?}: relative error {worst}");
        }
    }
}
