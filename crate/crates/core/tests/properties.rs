//! Property tests for the structural invariants: permutation behavior of
//! shuffling, round-trip persistence, buffer monotonicity, metric algebra,
//! and the gradient-step accounting of sequential runs.

use proptest::prelude::*;

use seqeval::algorithms::{AlgorithmKind, Hyperparams};
use seqeval::buffer::SequentialBuffer;
use seqeval::dataset::{
    generate_dataset, make_mixed, normalize_score, shuffle_dataset, OfflineDataset,
    ReferenceScores, Tier,
};
use seqeval::engine::{
    expected_offline_grad_steps, run_seqeval, EvalMetric, Phase, RunConfig,
};
use seqeval::envs::chain;
use seqeval::mdp::{discounted_return, rollout, MdpSpec, Transition};
use seqeval::metrics::{iqm, optimality_gap};
use seqeval::policy::Policy;
use seqeval::seeding::stream_rng;

fn chain_env(n_states: usize, horizon: usize) -> MdpSpec {
    chain("c", n_states, -1.0, 5.0, horizon)
}

fn refs(mdp: &MdpSpec) -> ReferenceScores {
    ReferenceScores {
        env_name: mdp.name.clone(),
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        random_ref: -20.0,
        expert_ref: 5.0,
    }
}

fn random_dataset(n_states: usize, horizon: usize, n: usize, seed: u64) -> OfflineDataset {
    let mdp = chain_env(n_states, horizon);
    let policy = Policy::uniform_random(mdp.n_states, mdp.n_actions).unwrap();
    let mut rng = stream_rng(seed, "prop-gen", 0);
    generate_dataset(&mdp, &policy, n, Tier::Random, &refs(&mdp), &mut rng).unwrap()
}

/// One transition keyed by content: (state, action, reward bits, next, done).
type TransitionKey = (usize, usize, u64, usize, bool);

/// Episode-block multiset of a slice, keyed by the full transition content.
fn episode_multiset(transitions: &[Transition]) -> Vec<Vec<TransitionKey>> {
    let mut blocks: Vec<Vec<TransitionKey>> = Vec::new();
    let mut current: Vec<TransitionKey> = Vec::new();
    let mut last_id = None;
    for t in transitions {
        if last_id != Some(t.episode_id) && !current.is_empty() {
            blocks.push(std::mem::take(&mut current));
        }
        last_id = Some(t.episode_id);
        current.push((t.state, t.action, t.reward.to_bits(), t.next_state, t.done));
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    blocks.sort();
    blocks
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rollout_respects_horizon_and_chains(
        n_states in 3usize..7,
        horizon in 1usize..20,
        seed in any::<u64>(),
    ) {
        let mdp = chain_env(n_states, horizon);
        let policy = Policy::uniform_random(mdp.n_states, 2).unwrap();
        let mut rng = stream_rng(seed, "prop-roll", 0);
        let ep = rollout(&mdp, &policy, &mut rng).unwrap();
        prop_assert!(ep.transitions.len() <= horizon);
        for pair in ep.transitions.windows(2) {
            prop_assert_eq!(pair[0].next_state, pair[1].state);
        }
        let rewards: Vec<f64> = ep.transitions.iter().map(|t| t.reward).collect();
        let undiscounted = discounted_return(&rewards, 1.0).unwrap();
        prop_assert!((undiscounted - ep.total_return).abs() < 1e-9);
    }

    #[test]
    fn normalize_matches_independent_arithmetic(
        raw in -1e4f64..1e4,
        random_ref in -1e3f64..1e3,
        span in 1e-3f64..1e3,
    ) {
        let mdp = chain_env(4, 8);
        let mut r = refs(&mdp);
        r.random_ref = random_ref;
        r.expert_ref = random_ref + span;
        let d = {
            let policy = Policy::uniform_random(4, 2).unwrap();
            let mut rng = stream_rng(1, "prop-gen", 0);
            generate_dataset(&mdp, &policy, 10, Tier::Random, &r, &mut rng).unwrap()
        };
        let got = normalize_score(raw, &d.meta).unwrap();
        let expected = 100.0 * (raw - random_ref) / span;
        prop_assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn shuffle_preserves_episode_multisets_per_segment(
        n in 30usize..150,
        seed in any::<u64>(),
        shuffle_seed in any::<u64>(),
    ) {
        let a = random_dataset(5, 10, n, seed);
        let b = {
            let mut b = random_dataset(5, 10, n, seed.wrapping_add(1));
            b.meta.tier = Tier::Expert;
            b.segments[0].label = Tier::Expert;
            b
        };
        let mixed = make_mixed(&[a, b], &[0.5, 0.5]).unwrap();
        let shuffled = shuffle_dataset(&mixed, shuffle_seed);
        shuffled.validate().unwrap();
        prop_assert_eq!(&shuffled.segments, &mixed.segments);
        for seg in &mixed.segments {
            prop_assert_eq!(
                episode_multiset(&mixed.transitions[seg.start..seg.end]),
                episode_multiset(&shuffled.transitions[seg.start..seg.end])
            );
        }
    }

    #[test]
    fn dataset_text_round_trip(
        n in 10usize..120,
        seed in any::<u64>(),
    ) {
        let d = random_dataset(5, 10, n, seed);
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let back = OfflineDataset::read_from(&buf[..], "mem").unwrap();
        prop_assert_eq!(d, back);
    }

    #[test]
    fn buffer_visibility_is_monotone_and_bounds_batches(
        n in 20usize..200,
        t0 in 1usize..20,
        gamma in 1usize..8,
        batch in 1usize..16,
        seed in any::<u64>(),
    ) {
        let d = random_dataset(5, 10, n, seed);
        let t0 = t0.min(d.len());
        let mut buffer = SequentialBuffer::new(&d, t0).unwrap();
        let mut rng = stream_rng(seed, "prop-buf", 1);
        let mut last_visible = buffer.visible();
        loop {
            let batch_indices = buffer.sample_batch(batch, true, &mut rng).unwrap();
            prop_assert!(batch_indices.iter().all(|&i| i < buffer.visible()));
            prop_assert!(buffer.visible() >= last_visible);
            last_visible = buffer.visible();
            match buffer.extend(gamma).unwrap() {
                seqeval::buffer::ExtendOutcome::Extended(_) => {}
                seqeval::buffer::ExtendOutcome::Exhausted => break,
            }
        }
    }

    #[test]
    fn iqm_is_permutation_invariant_and_bounded(
        mut scores in prop::collection::vec(-1e3f64..1e3, 1..24),
        rot in 0usize..24,
    ) {
        let original = iqm(&scores).unwrap();
        let rot = rot % scores.len();
        scores.rotate_left(rot);
        let rotated = iqm(&scores).unwrap();
        prop_assert!((original - rotated).abs() < 1e-9);
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(original >= min - 1e-9 && original <= max + 1e-9);
    }

    #[test]
    fn iqm_of_constant_list_is_the_constant(
        value in -1e3f64..1e3,
        len in 1usize..16,
    ) {
        let scores = vec![value; len];
        prop_assert!((iqm(&scores).unwrap() - value).abs() < 1e-9);
    }

    #[test]
    fn optimality_gap_zero_iff_all_above_threshold(
        scores in prop::collection::vec(0f64..200.0, 1..16),
    ) {
        let gap = optimality_gap(&scores, 100.0).unwrap();
        let all_above = scores.iter().all(|&s| s >= 100.0);
        prop_assert_eq!(gap == 0.0, all_above);
    }

    #[test]
    fn offline_accounting_is_exact(
        n in 30usize..160,
        t0 in 1usize..30,
        gamma in 1usize..6,
        k in 0usize..4,
        seed in any::<u64>(),
    ) {
        let d = random_dataset(5, 10, n, seed);
        let mdp = chain_env(5, 10);
        let t0 = t0.min(d.len());
        let cfg = RunConfig {
            algorithm: AlgorithmKind::Bc,
            hyper: Hyperparams { batch_size: 4, ..Hyperparams::default() },
            t0,
            gamma_increment: gamma,
            k_steps: k,
            eval_every: n.max(1),
            eval_episodes: 1,
            online_steps: 0,
            seed,
            eval_metric: EvalMetric::Rollout,
        };
        let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
        prop_assert_eq!(
            outcome.report.offline_grad_steps,
            expected_offline_grad_steps(n, t0, gamma, k)
        );
        for p in &outcome.curve.points {
            prop_assert_eq!(p.phase, Phase::Offline);
        }
        // Monotone data counts along the curve.
        for pair in outcome.curve.points.windows(2) {
            prop_assert!(pair[0].data_count <= pair[1].data_count);
        }
    }
}
