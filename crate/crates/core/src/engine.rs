//! The sequential-evaluation driver, the matched mini-batch baseline, and
//! the online fine-tuning phase.
//!
//! A sequential run shuffles the dataset for its seed, reveals it to the
//! learner `gamma_increment` transitions at a time, trains one ensure-new
//! batch plus `k_steps` plain batches per increment, and evaluates whenever
//! the visibility counter crosses a multiple of `eval_every`. When the
//! offline data runs out the run either stops (after a final evaluation) or
//! continues by interacting with the environment for `online_steps` steps,
//! appending each collected transition to the same buffer and evaluating on
//! the same counter grid.

use serde::{Deserialize, Serialize};

use crate::algorithms::{ActMode, AlgorithmKind, AlgorithmState, Hyperparams};
use crate::buffer::{ExtendOutcome, SequentialBuffer};
use crate::dataset::{normalize_score, shuffle_dataset, OfflineDataset};
use crate::error::{Result, SeqEvalError};
use crate::evaluation::{evaluate_policy, fqe_score};
use crate::mdp::{step, MdpSpec, Transition};
use crate::seeding::{stream_rng, stream_seed};

/// How evaluation points score the current policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EvalMetric {
    /// Mean return over `eval_episodes` simulator rollouts.
    Rollout,
    /// Fitted Q evaluation against the full dataset, retrained from scratch
    /// at every evaluation.
    Fqe { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: AlgorithmKind,
    pub hyper: Hyperparams,
    /// Initially visible transitions.
    pub t0: usize,
    /// Transitions revealed per increment.
    pub gamma_increment: usize,
    /// Plain gradient steps per increment, on top of the ensure-new step.
    pub k_steps: usize,
    /// Evaluation grid spacing, in units of the visibility counter.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Environment steps of online fine-tuning after the offline data is
    /// exhausted; 0 disables the phase.
    pub online_steps: usize,
    pub seed: u64,
    pub eval_metric: EvalMetric,
}

impl RunConfig {
    /// Configured replay ratio `k_steps / gamma_increment`.
    pub fn replay_ratio(&self) -> f64 {
        self.k_steps as f64 / self.gamma_increment as f64
    }

    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        self.hyper.validate()?;
        if self.gamma_increment == 0 {
            return Err(SeqEvalError::Config("gamma_increment must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(SeqEvalError::Config("eval_every must be at least 1".into()));
        }
        if self.eval_episodes == 0 {
            return Err(SeqEvalError::Config("eval_episodes must be at least 1".into()));
        }
        if self.t0 == 0 || self.t0 > dataset_len {
            return Err(SeqEvalError::Config(format!(
                "t0 = {} must lie in [1, {dataset_len}]",
                self.t0
            )));
        }
        if let EvalMetric::Fqe { iterations } = self.eval_metric {
            if iterations == 0 {
                return Err(SeqEvalError::Config("fqe iterations must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Offline,
    Online,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Offline => "offline",
            Phase::Online => "online",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Transitions visible when the evaluation ran.
    pub data_count: u64,
    /// Cumulative gradient steps when the evaluation ran.
    pub grad_steps: u64,
    pub raw_score: f64,
    pub norm_score: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub run_id: String,
    pub seed: u64,
    pub points: Vec<EvalPoint>,
}

/// Receives evaluation points as they are produced, so curves can stream to
/// disk during long runs.
pub trait EvalSink {
    fn record(&mut self, point: &EvalPoint) -> Result<()>;
}

/// Sink that drops everything; used when only the returned curve matters.
pub struct NullSink;

impl EvalSink for NullSink {
    fn record(&mut self, _point: &EvalPoint) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&EvalPoint) -> Result<()>> EvalSink for F {
    fn record(&mut self, point: &EvalPoint) -> Result<()> {
        self(point)
    }
}

/// Accounting and coverage facts gathered over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Gradient steps during the offline phase.
    pub offline_grad_steps: u64,
    /// Gradient steps over the whole run, fine-tuning included.
    pub total_grad_steps: u64,
    /// Offline extension iterations performed.
    pub iterations: u64,
    /// Configured replay ratio `k_steps / gamma_increment`.
    pub replay_ratio: f64,
    /// Plain (non-ensure-new) gradient steps per revealed offline datum;
    /// this is the measured replay ratio. The ensure-new pass sits on top
    /// of it, so total steps per datum is `(1 + k) / gamma`.
    pub measured_steps_per_datum: f64,
    /// How often each buffer index was trained on.
    pub hit_counts: Vec<u64>,
    /// Indices never trained on (empty in any draining configuration).
    pub uncovered: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub curve: LearningCurve,
    pub report: RunReport,
}

struct RunContext<'a> {
    mdp: &'a MdpSpec,
    dataset: OfflineDataset,
    cfg: &'a RunConfig,
    learner: AlgorithmState,
    buffer: SequentialBuffer,
    grad_steps: u64,
    eval_index: u64,
    points: Vec<EvalPoint>,
}

impl<'a> RunContext<'a> {
    fn new(mdp: &'a MdpSpec, dataset: &OfflineDataset, cfg: &'a RunConfig, t0: usize) -> Result<Self> {
        cfg.validate(dataset.len())?;
        if dataset.meta.env_name != mdp.name {
            return Err(SeqEvalError::Config(format!(
                "dataset is for '{}', not '{}'",
                dataset.meta.env_name, mdp.name
            )));
        }
        if dataset.meta.n_states != mdp.n_states || dataset.meta.n_actions != mdp.n_actions {
            return Err(SeqEvalError::Config(
                "dataset dimensions do not match the environment".into(),
            ));
        }
        // Per-seed shuffle so curves are not specific to one data order.
        let shuffled = shuffle_dataset(dataset, stream_seed(cfg.seed, "shuffle", 0));
        let buffer = SequentialBuffer::new(&shuffled, t0)?;
        let learner = AlgorithmState::new(mdp.n_states, mdp.n_actions, cfg.hyper);
        Ok(RunContext {
            mdp,
            dataset: shuffled,
            cfg,
            learner,
            buffer,
            grad_steps: 0,
            eval_index: 0,
            points: Vec::new(),
        })
    }

    fn train_one(&mut self, include_pending: bool, rng: &mut rand_chacha::ChaCha8Rng) -> Result<()> {
        let indices =
            self.buffer
                .sample_batch(self.cfg.hyper.batch_size, include_pending, rng)?;
        let batch = self.buffer.gather(&indices);
        self.learner.train_step(self.cfg.algorithm, &batch);
        self.grad_steps += 1;
        Ok(())
    }

    fn evaluate(&mut self, phase: Phase, sink: &mut dyn EvalSink) -> Result<()> {
        let mut rng = stream_rng(self.cfg.seed, "eval", self.eval_index);
        self.eval_index += 1;
        let raw_score = match self.cfg.eval_metric {
            EvalMetric::Rollout => {
                let policy = self.learner.eval_policy(self.cfg.algorithm)?;
                evaluate_policy(self.mdp, &policy, self.cfg.eval_episodes, &mut rng)?.0
            }
            EvalMetric::Fqe { iterations } => {
                let policy = self.learner.eval_policy(self.cfg.algorithm)?;
                fqe_score(
                    &self.dataset,
                    self.mdp,
                    &policy,
                    self.cfg.hyper.discount,
                    iterations,
                )?
            }
        };
        let norm_score = normalize_score(raw_score, &self.dataset.meta)?;
        let point = EvalPoint {
            data_count: self.buffer.visible() as u64,
            grad_steps: self.grad_steps,
            raw_score,
            norm_score,
            phase,
        };
        sink.record(&point)?;
        self.points.push(point);
        Ok(())
    }

    /// Evaluates unless the last point already describes the current
    /// (data_count, grad_steps) state.
    fn ensure_evaluated(&mut self, phase: Phase, sink: &mut dyn EvalSink) -> Result<()> {
        let current = (self.buffer.visible() as u64, self.grad_steps);
        if self.points.last().map(|p| (p.data_count, p.grad_steps)) == Some(current) {
            return Ok(());
        }
        self.evaluate(phase, sink)
    }

    fn crossed_eval_grid(&self, before: usize, after: usize) -> bool {
        before / self.cfg.eval_every < after / self.cfg.eval_every
    }

    fn into_outcome(self, run_id: String, iterations: u64, offline_grad_steps: u64) -> RunOutcome {
        let hit_counts = self.buffer.hit_counts().to_vec();
        let uncovered = hit_counts.iter().filter(|&&h| h == 0).count() as u64;
        let revealed = self.buffer.offline_len() - self.cfg.t0.min(self.buffer.offline_len());
        let measured = if revealed == 0 {
            0.0
        } else {
            (iterations * self.cfg.k_steps as u64) as f64 / revealed as f64
        };
        RunOutcome {
            curve: LearningCurve {
                run_id,
                seed: self.cfg.seed,
                points: self.points,
            },
            report: RunReport {
                offline_grad_steps,
                total_grad_steps: self.grad_steps,
                iterations,
                replay_ratio: self.cfg.replay_ratio(),
                measured_steps_per_datum: measured,
                hit_counts,
                uncovered,
            },
        }
    }
}

/// Canonical run identifier, also used by curve-file headers.
pub fn run_id_for(mode: &str, dataset: &OfflineDataset, cfg: &RunConfig) -> String {
    format!(
        "{mode}-{}-{}-{}-s{}",
        cfg.algorithm, dataset.meta.env_name, dataset.meta.tier, cfg.seed
    )
}

/// Expected offline gradient steps of a sequential run:
/// `ceil((len - t0) / gamma) * (1 + k)`.
pub fn expected_offline_grad_steps(len: usize, t0: usize, gamma: usize, k: usize) -> u64 {
    let remaining = len.saturating_sub(t0) as u64;
    remaining.div_ceil(gamma as u64) * (1 + k as u64)
}

/// Runs the sequential protocol, streaming evaluation points into `sink`.
pub fn run_seqeval_with(
    mdp: &MdpSpec,
    dataset: &OfflineDataset,
    cfg: &RunConfig,
    sink: &mut dyn EvalSink,
) -> Result<RunOutcome> {
    let mut ctx = RunContext::new(mdp, dataset, cfg, cfg.t0)?;
    // The initial block counts as the first addition of data, so it too is
    // guaranteed into upcoming ensure-new batches.
    ctx.buffer.queue_pending(0..cfg.t0)?;
    let mut train_rng = stream_rng(cfg.seed, "train", 0);
    let mut iterations = 0u64;

    while !ctx.buffer.offline_exhausted() {
        let before = ctx.buffer.visible();
        match ctx.buffer.extend(cfg.gamma_increment)? {
            ExtendOutcome::Extended(_) => {}
            ExtendOutcome::Exhausted => break,
        }
        iterations += 1;
        ctx.train_one(true, &mut train_rng)?;
        for _ in 0..cfg.k_steps {
            ctx.train_one(false, &mut train_rng)?;
        }
        let after = ctx.buffer.visible();
        if ctx.crossed_eval_grid(before, after) {
            ctx.evaluate(Phase::Offline, sink)?;
        }
    }
    // The loop only evaluates inside it, so the final buffer state could
    // otherwise go unmeasured when the grid does not land on the end.
    ctx.ensure_evaluated(Phase::Offline, sink)?;
    let offline_grad_steps = ctx.grad_steps;

    if cfg.online_steps > 0 {
        run_finetune_phase(&mut ctx, sink, &mut train_rng)?;
        ctx.ensure_evaluated(Phase::Online, sink)?;
    }

    let run_id = run_id_for("seqeval", dataset, cfg);
    Ok(ctx.into_outcome(run_id, iterations, offline_grad_steps))
}

/// Runs the sequential protocol; see [`run_seqeval_with`].
pub fn run_seqeval(mdp: &MdpSpec, dataset: &OfflineDataset, cfg: &RunConfig) -> Result<RunOutcome> {
    run_seqeval_with(mdp, dataset, cfg, &mut NullSink)
}

/// Online fine-tuning: interact, append, train, evaluate on the same grid.
fn run_finetune_phase(
    ctx: &mut RunContext<'_>,
    sink: &mut dyn EvalSink,
    train_rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<()> {
    let mut env_rng = stream_rng(ctx.cfg.seed, "online", 0);
    let mut episode_id = ctx.dataset.episode_count() as u64;
    let mut state = ctx.mdp.sample_start(&mut env_rng);
    let mut step_index = 0usize;
    for _ in 0..ctx.cfg.online_steps {
        // Horizon-zero environments cannot produce online transitions.
        if ctx.mdp.horizon == 0 {
            break;
        }
        if ctx.mdp.is_terminal(state) || step_index >= ctx.mdp.horizon {
            episode_id += 1;
            state = ctx.mdp.sample_start(&mut env_rng);
            step_index = 0;
            if ctx.mdp.is_terminal(state) {
                continue;
            }
        }
        let action = ctx
            .learner
            .act(ctx.cfg.algorithm, state, ActMode::Explore, &mut env_rng)?;
        let (next_state, reward, terminal) = step(ctx.mdp, state, action, &mut env_rng)?;
        let done = terminal || step_index == ctx.mdp.horizon - 1;
        let transition = Transition {
            state,
            action,
            reward,
            next_state,
            done,
            episode_id,
            step_index,
        };
        let before = ctx.buffer.visible();
        ctx.buffer.append_online(transition)?;
        ctx.train_one(true, train_rng)?;
        for _ in 0..ctx.cfg.k_steps {
            ctx.train_one(false, train_rng)?;
        }
        let after = ctx.buffer.visible();
        if ctx.crossed_eval_grid(before, after) {
            ctx.evaluate(Phase::Online, sink)?;
        }
        if done {
            episode_id += 1;
            state = ctx.mdp.sample_start(&mut env_rng);
            step_index = 0;
        } else {
            state = next_state;
            step_index += 1;
        }
    }
    Ok(())
}

/// The mini-batch baseline: the whole dataset is visible from step 0 and
/// the curve advances by gradient steps, evaluated every `eval_every` of
/// them. Fine-tuning does not apply.
pub fn run_minibatch_with(
    mdp: &MdpSpec,
    dataset: &OfflineDataset,
    cfg: &RunConfig,
    total_grad_steps: u64,
    sink: &mut dyn EvalSink,
) -> Result<RunOutcome> {
    let mut ctx = RunContext::new(mdp, dataset, cfg, dataset.len())?;
    let mut train_rng = stream_rng(cfg.seed, "train", 0);
    while ctx.grad_steps < total_grad_steps {
        let before = ctx.grad_steps as usize;
        ctx.train_one(false, &mut train_rng)?;
        let after = ctx.grad_steps as usize;
        if ctx.crossed_eval_grid(before, after) {
            ctx.evaluate(Phase::Offline, sink)?;
        }
    }
    ctx.ensure_evaluated(Phase::Offline, sink)?;
    let offline = ctx.grad_steps;
    let run_id = run_id_for("minibatch", dataset, cfg);
    Ok(ctx.into_outcome(run_id, 0, offline))
}

/// Mini-batch baseline; see [`run_minibatch_with`].
pub fn run_minibatch(
    mdp: &MdpSpec,
    dataset: &OfflineDataset,
    cfg: &RunConfig,
    total_grad_steps: u64,
) -> Result<RunOutcome> {
    run_minibatch_with(mdp, dataset, cfg, total_grad_steps, &mut NullSink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, ReferenceScores, Tier};
    use crate::envs::chain;
    use crate::policy::Policy;

    fn fixture(n: usize) -> (MdpSpec, OfflineDataset) {
        let mdp = chain("c", 5, -1.0, 5.0, 12);
        let refs = ReferenceScores {
            env_name: "c".into(),
            n_states: 5,
            n_actions: 2,
            random_ref: -12.0,
            expert_ref: 1.0,
        };
        let policy = Policy::uniform_random(5, 2).unwrap();
        let mut rng = stream_rng(1, "gen", 0);
        let d = generate_dataset(&mdp, &policy, n, Tier::Random, &refs, &mut rng).unwrap();
        (mdp, d)
    }

    fn config(seed: u64) -> RunConfig {
        RunConfig {
            algorithm: AlgorithmKind::Ql,
            hyper: Hyperparams {
                batch_size: 8,
                ..Hyperparams::default()
            },
            t0: 2,
            gamma_increment: 1,
            k_steps: 1,
            eval_every: 50,
            eval_episodes: 3,
            online_steps: 0,
            seed,
            eval_metric: EvalMetric::Rollout,
        }
    }

    #[test]
    fn hand_traced_accounting_ten_transitions() {
        // len 10, t0 2, gamma 1, k 1: 8 iterations, 16 gradient steps.
        let (mdp, d) = fixture(10);
        let mut cfg = config(0);
        cfg.eval_every = 5;
        let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
        assert_eq!(outcome.report.iterations, 8);
        assert_eq!(outcome.report.offline_grad_steps, 16);
        assert_eq!(
            outcome.report.offline_grad_steps,
            expected_offline_grad_steps(10, 2, 1, 1)
        );
    }

    #[test]
    fn data_count_tracks_grad_steps_at_unit_replay_ratio() {
        // gamma = k = 1: data_count = grad_steps / 2 + t0 at every point.
        let (mdp, d) = fixture(200);
        let mut cfg = config(3);
        cfg.t0 = 20;
        let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
        assert!(!outcome.curve.points.is_empty());
        for p in &outcome.curve.points {
            assert_eq!(p.data_count, p.grad_steps / 2 + 20);
        }
    }

    #[test]
    fn full_t0_behaves_like_zero_step_minibatch() {
        let (mdp, d) = fixture(60);
        let mut cfg = config(7);
        cfg.t0 = 60;
        let seq = run_seqeval(&mdp, &d, &cfg).unwrap();
        assert_eq!(seq.report.iterations, 0);
        assert_eq!(seq.report.offline_grad_steps, 0);
        let mini = run_minibatch(&mdp, &d, &cfg, 0).unwrap();
        assert_eq!(seq.curve.points, mini.curve.points);
        assert_eq!(seq.curve.points.len(), 1);
    }

    #[test]
    fn minibatch_keeps_data_count_constant() {
        let (mdp, d) = fixture(80);
        let cfg = config(5);
        let outcome = run_minibatch(&mdp, &d, &cfg, 120).unwrap();
        assert_eq!(outcome.report.total_grad_steps, 120);
        for p in &outcome.curve.points {
            assert_eq!(p.data_count, 80);
        }
        let grad_counts: Vec<u64> = outcome.curve.points.iter().map(|p| p.grad_steps).collect();
        assert_eq!(grad_counts, vec![50, 100, 120]);
    }

    #[test]
    fn identical_seeds_reproduce_identical_curves() {
        let (mdp, d) = fixture(150);
        let cfg = config(11);
        let a = run_seqeval(&mdp, &d, &cfg).unwrap();
        let b = run_seqeval(&mdp, &d, &cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        let m1 = run_minibatch(&mdp, &d, &cfg, 100).unwrap();
        let m2 = run_minibatch(&mdp, &d, &cfg, 100).unwrap();
        assert_eq!(m1.curve, m2.curve);
    }

    #[test]
    fn every_offline_index_is_trained_on() {
        let (mdp, d) = fixture(300);
        let mut cfg = config(13);
        cfg.t0 = 30;
        let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
        assert_eq!(outcome.report.uncovered, 0);
        assert!(outcome.report.hit_counts.iter().all(|&h| h > 0));
    }

    #[test]
    fn online_phase_extends_curve_past_dataset() {
        let (mdp, d) = fixture(100);
        let mut cfg = config(17);
        cfg.t0 = 10;
        cfg.online_steps = 50;
        cfg.eval_every = 25;
        let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
        let phases: Vec<Phase> = outcome.curve.points.iter().map(|p| p.phase).collect();
        // Exactly one offline -> online switch.
        let switches = phases.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(switches, 1);
        let boundary = outcome
            .curve
            .points
            .iter()
            .rev()
            .find(|p| p.phase == Phase::Offline)
            .unwrap();
        assert_eq!(boundary.data_count, 100);
        // First online grid point lands one grid step past the dataset.
        let first_online = outcome
            .curve
            .points
            .iter()
            .find(|p| p.phase == Phase::Online)
            .unwrap();
        assert_eq!(first_online.data_count, 125);
        let last = outcome.curve.points.last().unwrap();
        assert_eq!(last.data_count, 150);
        assert_eq!(last.phase, Phase::Online);
        // Data counts never decrease along the curve.
        for pair in outcome.curve.points.windows(2) {
            assert!(pair[0].data_count <= pair[1].data_count);
        }
    }

    #[test]
    fn zero_online_steps_appends_nothing() {
        let (mdp, d) = fixture(100);
        let mut cfg = config(19);
        cfg.online_steps = 0;
        let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
        assert!(outcome.curve.points.iter().all(|p| p.phase == Phase::Offline));
    }

    #[test]
    fn invalid_configs_fail_before_any_work() {
        let (mdp, d) = fixture(50);
        let mut cfg = config(0);
        cfg.gamma_increment = 0;
        assert!(matches!(
            run_seqeval(&mdp, &d, &cfg),
            Err(SeqEvalError::Config(_))
        ));
        let mut cfg = config(0);
        cfg.t0 = 51;
        assert!(run_seqeval(&mdp, &d, &cfg).is_err());
        let mut cfg = config(0);
        cfg.eval_every = 0;
        assert!(run_seqeval(&mdp, &d, &cfg).is_err());
    }

    #[test]
    fn replay_ratio_measurement_matches_configuration() {
        let (mdp, d) = fixture(400);
        for (gamma, k, rr) in [(4usize, 1usize, 0.25f64), (1, 1, 1.0), (1, 4, 4.0)] {
            let mut cfg = config(23);
            cfg.t0 = 80; // leaves 320 revealed, divisible by 4
            cfg.gamma_increment = gamma;
            cfg.k_steps = k;
            let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
            assert_eq!(cfg.replay_ratio(), rr);
            assert!(
                (outcome.report.measured_steps_per_datum - rr).abs() < 1e-12,
                "measured {} vs {rr}",
                outcome.report.measured_steps_per_datum
            );
            assert_eq!(
                outcome.report.offline_grad_steps,
                expected_offline_grad_steps(400, 80, gamma, k)
            );
        }
    }

    #[test]
    fn fqe_metric_produces_a_curve() {
        let (mdp, d) = fixture(120);
        let mut cfg = config(29);
        cfg.t0 = 40;
        cfg.eval_every = 40;
        cfg.eval_metric = EvalMetric::Fqe { iterations: 50 };
        let outcome = run_seqeval(&mdp, &d, &cfg).unwrap();
        assert!(outcome.curve.points.len() >= 2);
        assert!(outcome.curve.points.iter().all(|p| p.raw_score.is_finite()));
    }
}
