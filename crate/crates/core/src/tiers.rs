//! Standard dataset tiers for one environment.
//!
//! A Q-learner is trained online with epsilon-greedy exploration; the
//! checkpoint at one third of the budget drives the medium tier and the
//! final checkpoint drives the expert tier. Dataset policies are
//! epsilon-greedy around their checkpoints so the logs keep some state
//! coverage, like noisy real collection policies. Derived tiers:
//!
//! - `medium-replay`: the transition log of the medium checkpoint's own
//!   training run (its replay buffer), capped at the tier size;
//! - `medium-expert`: equal halves of fresh medium and expert data;
//! - `mixed`: equal thirds of random, medium, and expert data, in that
//!   order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algorithms::{ActMode, AlgorithmKind, AlgorithmState, Hyperparams};
use crate::dataset::{
    complete_episode_returns, compute_reference_scores, generate_dataset, make_mixed,
    DatasetMeta, OfflineDataset, ReferenceScores, Segment, Tier,
};
use crate::error::{Result, SeqEvalError};
use crate::mdp::{step, MdpSpec, Transition};
use crate::policy::Policy;
use crate::seeding::stream_rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TierBuildConfig {
    /// Target size of each base tier. `medium-expert` gets twice this and
    /// `mixed` three times, mirroring their construction.
    pub transitions_per_tier: usize,
    /// Online training budget for the expert policy; the medium checkpoint
    /// is taken at one third of it.
    pub train_steps: usize,
    /// Exploration epsilon of the medium dataset policy.
    pub medium_epsilon: f64,
    /// Exploration epsilon of the expert dataset policy.
    pub expert_epsilon: f64,
    /// Monte Carlo episodes behind `random_ref` and `expert_ref`.
    pub reference_episodes: usize,
    pub seed: u64,
    /// Hyperparameters of the training run. `q_init` should sit at or
    /// above the best achievable return so exploration is systematic.
    pub train_hyper: Hyperparams,
}

impl Default for TierBuildConfig {
    fn default() -> Self {
        TierBuildConfig {
            transitions_per_tier: 9_000,
            train_steps: 15_000,
            medium_epsilon: 0.35,
            expert_epsilon: 0.05,
            reference_episodes: 1_000,
            seed: 7,
            train_hyper: Hyperparams {
                learning_rate: 0.2,
                discount: 0.9,
                target_sync_every: 1,
                explore_epsilon: 0.2,
                q_init: 1.0,
                ..Hyperparams::default()
            },
        }
    }
}

/// Everything the tier pipeline produces.
#[derive(Debug, Clone)]
pub struct BuiltTiers {
    pub refs: ReferenceScores,
    pub medium_checkpoint: AlgorithmState,
    pub expert_checkpoint: AlgorithmState,
    pub datasets: BTreeMap<Tier, OfflineDataset>,
}

/// Trains a Q-learner online with epsilon-greedy exploration, one gradient
/// step per environment step. Returns snapshots at each requested step
/// count (sorted ascending) plus the full transition log of the run.
pub fn train_policy_online(
    mdp: &MdpSpec,
    hyper: Hyperparams,
    total_steps: usize,
    checkpoint_at: &[usize],
    seed: u64,
) -> Result<(Vec<AlgorithmState>, Vec<Transition>)> {
    hyper.validate()?;
    if mdp.horizon == 0 {
        return Err(SeqEvalError::InvalidInput(
            "cannot train online with a zero horizon".into(),
        ));
    }
    let mut rng = stream_rng(seed, "train-policy", 0);
    let mut learner = AlgorithmState::new(mdp.n_states, mdp.n_actions, hyper);
    let mut log = Vec::with_capacity(total_steps);
    let mut snapshots = Vec::with_capacity(checkpoint_at.len());
    let mut marks = checkpoint_at.iter().copied().peekable();
    let mut episode_id = 0u64;
    let mut state = mdp.sample_start(&mut rng);
    let mut step_index = 0usize;
    for step_no in 1..=total_steps {
        while mdp.is_terminal(state) {
            episode_id += 1;
            state = mdp.sample_start(&mut rng);
            step_index = 0;
        }
        let action = learner.act(AlgorithmKind::Ql, state, ActMode::Explore, &mut rng)?;
        let (next_state, reward, terminal) = step(mdp, state, action, &mut rng)?;
        let done = terminal || step_index == mdp.horizon - 1;
        let transition = Transition {
            state,
            action,
            reward,
            next_state,
            done,
            episode_id,
            step_index,
        };
        learner.ql_train_step(std::slice::from_ref(&transition));
        log.push(transition);
        if done {
            episode_id += 1;
            state = mdp.sample_start(&mut rng);
            step_index = 0;
        } else {
            state = next_state;
            step_index += 1;
        }
        while marks.peek() == Some(&step_no) {
            snapshots.push(learner.clone());
            marks.next();
        }
    }
    Ok((snapshots, log))
}

/// Builds the requested tiers (every tier when `tiers` is empty).
pub fn build_tier_datasets(
    mdp: &MdpSpec,
    tiers: &[Tier],
    cfg: &TierBuildConfig,
) -> Result<BuiltTiers> {
    if cfg.transitions_per_tier == 0 {
        return Err(SeqEvalError::Config(
            "transitions_per_tier must be positive".into(),
        ));
    }
    if cfg.train_steps < 3 {
        return Err(SeqEvalError::Config("train_steps must be at least 3".into()));
    }
    let requested: Vec<Tier> = if tiers.is_empty() {
        Tier::ALL.to_vec()
    } else {
        tiers.to_vec()
    };

    let medium_at = cfg.train_steps.div_ceil(3);
    let (snapshots, train_log) = train_policy_online(
        mdp,
        cfg.train_hyper,
        cfg.train_steps,
        &[medium_at, cfg.train_steps],
        cfg.seed,
    )?;
    let medium_checkpoint = snapshots[0].clone();
    let expert_checkpoint = snapshots[1].clone();

    let random_policy = Policy::uniform_random(mdp.n_states, mdp.n_actions)?;
    let medium_policy =
        Policy::epsilon_greedy_from_q(medium_checkpoint.q.clone(), cfg.medium_epsilon)?;
    let expert_policy =
        Policy::epsilon_greedy_from_q(expert_checkpoint.q.clone(), cfg.expert_epsilon)?;

    let refs = compute_reference_scores(mdp, &expert_policy, cfg.reference_episodes, cfg.seed)?;

    let n = cfg.transitions_per_tier;
    let gen = |policy: &Policy, tier: Tier, label: &str| -> Result<OfflineDataset> {
        let mut rng = stream_rng(cfg.seed, label, 0);
        generate_dataset(mdp, policy, n, tier, &refs, &mut rng)
    };
    // Base tiers are generated once and shared by the derived tiers, so a
    // given seed yields the same bytes regardless of which tiers were
    // requested.
    let random = gen(&random_policy, Tier::Random, "tier-random")?;
    let medium = gen(&medium_policy, Tier::Medium, "tier-medium")?;
    let expert = gen(&expert_policy, Tier::Expert, "tier-expert")?;

    let mut datasets = BTreeMap::new();
    for tier in requested {
        let dataset = match tier {
            Tier::Random => random.clone(),
            Tier::Medium => medium.clone(),
            Tier::Expert => expert.clone(),
            Tier::MediumReplay => medium_replay_dataset(&train_log, medium_at, n, &refs)?,
            Tier::MediumExpert => {
                let med = gen(&medium_policy, Tier::Medium, "tier-medium-expert-med")?;
                let exp = gen(&expert_policy, Tier::Expert, "tier-medium-expert-exp")?;
                let mut mixed = make_mixed(&[med, exp], &[0.5, 0.5])?;
                mixed.meta.tier = Tier::MediumExpert;
                mixed
            }
            Tier::Mixed => make_mixed(
                &[random.clone(), medium.clone(), expert.clone()],
                &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            )?,
        };
        datasets.insert(tier, dataset);
    }
    Ok(BuiltTiers {
        refs,
        medium_checkpoint,
        expert_checkpoint,
        datasets,
    })
}

/// The medium learner's own training log, capped at `cap` transitions.
fn medium_replay_dataset(
    train_log: &[Transition],
    medium_at: usize,
    cap: usize,
    refs: &ReferenceScores,
) -> Result<OfflineDataset> {
    let upto = medium_at.min(train_log.len());
    let take = upto.min(cap);
    let transitions: Vec<Transition> = train_log[..take].to_vec();
    if transitions.is_empty() {
        return Err(SeqEvalError::InvalidInput(
            "training log is empty; cannot build medium-replay".into(),
        ));
    }
    let returns = complete_episode_returns(&transitions);
    let score = if returns.is_empty() {
        transitions.iter().map(|t| t.reward).sum()
    } else {
        returns.iter().sum::<f64>() / returns.len() as f64
    };
    let len = transitions.len();
    let dataset = OfflineDataset {
        transitions,
        segments: vec![Segment {
            label: Tier::MediumReplay,
            start: 0,
            end: len,
        }],
        meta: DatasetMeta {
            env_name: refs.env_name.clone(),
            tier: Tier::MediumReplay,
            n_states: refs.n_states,
            n_actions: refs.n_actions,
            random_ref: refs.random_ref,
            expert_ref: refs.expert_ref,
            dataset_policy_score: score,
        },
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{gridworld, GridworldConfig};
    use crate::evaluation::evaluate_policy;

    fn small_cfg() -> TierBuildConfig {
        TierBuildConfig {
            transitions_per_tier: 600,
            reference_episodes: 300,
            seed: 7,
            ..TierBuildConfig::default()
        }
    }

    fn env() -> crate::mdp::MdpSpec {
        let mut cfg = GridworldConfig::example("grid6", 6, 6);
        cfg.step_reward = 0.0;
        cfg.goal_reward = 1.0;
        cfg.horizon = 14;
        gridworld(&cfg).unwrap()
    }

    #[test]
    fn builds_all_tiers_with_expected_sizes() {
        let mdp = env();
        let built = build_tier_datasets(&mdp, &[], &small_cfg()).unwrap();
        assert_eq!(built.datasets.len(), 6);
        assert_eq!(built.datasets[&Tier::Random].len(), 600);
        assert_eq!(built.datasets[&Tier::Medium].len(), 600);
        assert_eq!(built.datasets[&Tier::Expert].len(), 600);
        assert_eq!(built.datasets[&Tier::MediumExpert].len(), 1_200);
        assert_eq!(built.datasets[&Tier::Mixed].len(), 1_800);
        assert!(built.datasets[&Tier::MediumReplay].len() <= 600);
        for (tier, d) in &built.datasets {
            assert_eq!(d.meta.tier, *tier);
            d.validate().unwrap();
        }
    }

    #[test]
    fn mixed_segments_run_random_medium_expert() {
        let mdp = env();
        let built = build_tier_datasets(&mdp, &[Tier::Mixed], &small_cfg()).unwrap();
        let mixed = &built.datasets[&Tier::Mixed];
        let labels: Vec<Tier> = mixed.segments.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![Tier::Random, Tier::Medium, Tier::Expert]);
    }

    #[test]
    fn medium_score_sits_strictly_between_references() {
        let mdp = env();
        let built = build_tier_datasets(&mdp, &[Tier::Medium], &small_cfg()).unwrap();
        let medium = &built.datasets[&Tier::Medium];
        assert!(
            medium.meta.dataset_policy_score > built.refs.random_ref,
            "medium {} vs random_ref {}",
            medium.meta.dataset_policy_score,
            built.refs.random_ref
        );
        assert!(
            medium.meta.dataset_policy_score < built.refs.expert_ref,
            "medium {} vs expert_ref {}",
            medium.meta.dataset_policy_score,
            built.refs.expert_ref
        );
        // The checkpoint itself evaluates between the references too.
        let medium_policy = Policy::epsilon_greedy_from_q(
            built.medium_checkpoint.q.clone(),
            small_cfg().medium_epsilon,
        )
        .unwrap();
        let mut rng = stream_rng(3, "check", 0);
        let (score, _) = evaluate_policy(&mdp, &medium_policy, 300, &mut rng).unwrap();
        assert!(score > built.refs.random_ref && score < built.refs.expert_ref);
    }

    #[test]
    fn same_seed_rebuilds_identical_datasets() {
        let mdp = env();
        let a = build_tier_datasets(&mdp, &[Tier::Random, Tier::Mixed], &small_cfg()).unwrap();
        let b = build_tier_datasets(&mdp, &[], &small_cfg()).unwrap();
        assert_eq!(a.datasets[&Tier::Random], b.datasets[&Tier::Random]);
        assert_eq!(a.datasets[&Tier::Mixed], b.datasets[&Tier::Mixed]);
    }
}
