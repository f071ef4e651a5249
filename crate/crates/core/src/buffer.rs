//! Replay buffer with a visibility counter.
//!
//! The buffer holds the whole dataset up front but only indices below the
//! counter may be sampled. Extending the counter queues the newly revealed
//! indices as pending; a pending index is guaranteed to appear in the next
//! ensure-new batch, with overflow carried over to later ensure-new batches
//! when more is pending than fits in one batch. Per-index hit counters
//! record how often each transition has been trained on.

use std::collections::{HashSet, VecDeque};
use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::OfflineDataset;
use crate::error::{Result, SeqEvalError};
use crate::mdp::Transition;

/// Result of asking the buffer to reveal more offline data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtendOutcome {
    /// The newly visible index range.
    Extended(Range<usize>),
    /// All offline data is already visible; switch to fine-tuning or stop.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct SequentialBuffer {
    transitions: Vec<Transition>,
    offline_len: usize,
    visible: usize,
    pending: VecDeque<usize>,
    hits: Vec<u64>,
}

impl SequentialBuffer {
    /// Wraps `dataset` with `t0` transitions initially visible.
    pub fn new(dataset: &OfflineDataset, t0: usize) -> Result<Self> {
        if t0 == 0 {
            return Err(SeqEvalError::InvalidInput(
                "t0 must be at least 1".into(),
            ));
        }
        if t0 > dataset.len() {
            return Err(SeqEvalError::InvalidInput(format!(
                "t0 = {t0} exceeds dataset size {}",
                dataset.len()
            )));
        }
        Ok(SequentialBuffer {
            transitions: dataset.transitions.clone(),
            offline_len: dataset.len(),
            visible: t0,
            pending: VecDeque::new(),
            hits: vec![0; dataset.len()],
        })
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn total(&self) -> usize {
        self.transitions.len()
    }

    pub fn offline_len(&self) -> usize {
        self.offline_len
    }

    pub fn offline_exhausted(&self) -> bool {
        self.visible >= self.offline_len
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Times each index has been included in a training batch.
    pub fn hit_counts(&self) -> &[u64] {
        &self.hits
    }

    /// Queues already-visible indices for guaranteed inclusion in upcoming
    /// ensure-new batches. The engine uses this once at run start so the
    /// initially visible block is trained on at least once, like every
    /// later extension.
    pub fn queue_pending(&mut self, range: Range<usize>) -> Result<()> {
        if range.end > self.visible {
            return Err(SeqEvalError::InvalidInput(format!(
                "pending range {range:?} exceeds visible {}",
                self.visible
            )));
        }
        self.pending.extend(range);
        Ok(())
    }

    /// Reveals up to `gamma` more offline transitions, queueing them as
    /// pending. Returns [`ExtendOutcome::Exhausted`] once everything
    /// offline is visible.
    pub fn extend(&mut self, gamma: usize) -> Result<ExtendOutcome> {
        if gamma == 0 {
            return Err(SeqEvalError::InvalidInput(
                "increment size must be at least 1".into(),
            ));
        }
        if self.offline_exhausted() {
            return Ok(ExtendOutcome::Exhausted);
        }
        let start = self.visible;
        let end = (start + gamma).min(self.offline_len);
        self.visible = end;
        self.pending.extend(start..end);
        Ok(ExtendOutcome::Extended(start..end))
    }

    /// Samples a training batch of distinct indices below the visibility
    /// counter. With `include_pending`, queued indices are drained first
    /// (oldest first) and count toward the batch; whatever does not fit
    /// stays queued for the next ensure-new batch. The remainder is filled
    /// with uniform draws, without replacement within the batch.
    pub fn sample_batch(
        &mut self,
        batch_size: usize,
        include_pending: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>> {
        if batch_size == 0 {
            return Err(SeqEvalError::InvalidInput("batch_size must be positive".into()));
        }
        if self.visible == 0 {
            return Err(SeqEvalError::InvalidInput("no visible data to sample".into()));
        }
        let effective = batch_size.min(self.visible);
        let mut batch = Vec::with_capacity(effective);
        let mut chosen = HashSet::with_capacity(effective);
        if include_pending {
            while batch.len() < effective {
                match self.pending.pop_front() {
                    Some(idx) => {
                        if chosen.insert(idx) {
                            batch.push(idx);
                        }
                    }
                    None => break,
                }
            }
        }
        while batch.len() < effective {
            let idx = rng.gen_range(0..self.visible);
            if chosen.insert(idx) {
                batch.push(idx);
            }
        }
        for &idx in &batch {
            self.hits[idx] += 1;
        }
        Ok(batch)
    }

    /// Copies the transitions at `indices`.
    pub fn gather(&self, indices: &[usize]) -> Vec<Transition> {
        indices.iter().map(|&i| self.transitions[i]).collect()
    }

    /// Appends a transition collected online. Only legal once the offline
    /// portion is fully visible; the new index becomes visible and pending
    /// immediately.
    pub fn append_online(&mut self, transition: Transition) -> Result<usize> {
        if !self.offline_exhausted() {
            return Err(SeqEvalError::Protocol(format!(
                "online append before offline data is exhausted ({} of {} visible)",
                self.visible, self.offline_len
            )));
        }
        let idx = self.transitions.len();
        self.transitions.push(transition);
        self.hits.push(0);
        self.visible = self.transitions.len();
        self.pending.push_back(idx);
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, ReferenceScores, Tier};
    use crate::envs::chain;
    use crate::policy::Policy;
    use crate::seeding::stream_rng;

    fn dataset(n: usize) -> OfflineDataset {
        let mdp = chain("c", 5, -1.0, 5.0, 12);
        let refs = ReferenceScores {
            env_name: "c".into(),
            n_states: 5,
            n_actions: 2,
            random_ref: -10.0,
            expert_ref: 10.0,
        };
        let policy = Policy::uniform_random(5, 2).unwrap();
        let mut rng = stream_rng(1, "gen", 0);
        generate_dataset(&mdp, &policy, n, Tier::Random, &refs, &mut rng).unwrap()
    }

    #[test]
    fn new_buffer_sets_visibility() {
        let d = dataset(100);
        let b = SequentialBuffer::new(&d, 20).unwrap();
        assert_eq!(b.visible(), 20);
        assert_eq!(b.pending_len(), 0);
        let full = SequentialBuffer::new(&d, 100).unwrap();
        assert!(full.offline_exhausted());
        assert!(SequentialBuffer::new(&d, 0).is_err());
        assert!(SequentialBuffer::new(&d, 101).is_err());
    }

    #[test]
    fn extend_clamps_and_signals_exhaustion() {
        let d = dataset(10);
        let mut b = SequentialBuffer::new(&d, 7).unwrap();
        assert_eq!(b.extend(1).unwrap(), ExtendOutcome::Extended(7..8));
        assert_eq!(b.pending_len(), 1);
        assert_eq!(b.extend(10).unwrap(), ExtendOutcome::Extended(8..10));
        assert_eq!(b.visible(), 10);
        assert_eq!(b.extend(1).unwrap(), ExtendOutcome::Exhausted);
    }

    #[test]
    fn batches_stay_below_visibility() {
        let d = dataset(50);
        let mut b = SequentialBuffer::new(&d, 10).unwrap();
        let mut rng = stream_rng(2, "s", 0);
        let batch = b.sample_batch(4, false, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|&i| i < 10));
        assert!(b.sample_batch(0, false, &mut rng).is_err());
    }

    #[test]
    fn ensure_new_batch_contains_the_pending_index() {
        let d = dataset(60);
        let mut b = SequentialBuffer::new(&d, 50).unwrap();
        b.extend(1).unwrap();
        let mut rng = stream_rng(3, "s", 0);
        let batch = b.sample_batch(32, true, &mut rng).unwrap();
        assert!(batch.contains(&50));
        assert_eq!(batch.len(), 32);
        assert!(batch.iter().all(|&i| i < 51));
        assert_eq!(b.pending_len(), 0);
    }

    #[test]
    fn pending_overflow_carries_to_the_next_ensure_new_batch() {
        let d = dataset(200);
        let mut b = SequentialBuffer::new(&d, 100).unwrap();
        b.extend(64).unwrap();
        let mut rng = stream_rng(4, "s", 0);
        let first = b.sample_batch(32, true, &mut rng).unwrap();
        assert_eq!(first, (100..132).collect::<Vec<_>>());
        assert_eq!(b.pending_len(), 32);
        let second = b.sample_batch(32, true, &mut rng).unwrap();
        assert_eq!(second, (132..164).collect::<Vec<_>>());
        assert_eq!(b.pending_len(), 0);
    }

    #[test]
    fn plain_batches_leave_pending_alone() {
        let d = dataset(40);
        let mut b = SequentialBuffer::new(&d, 30).unwrap();
        b.extend(5).unwrap();
        let mut rng = stream_rng(5, "s", 0);
        let _ = b.sample_batch(8, false, &mut rng).unwrap();
        assert_eq!(b.pending_len(), 5);
    }

    #[test]
    fn online_append_protocol() {
        let d = dataset(10);
        let mut b = SequentialBuffer::new(&d, 5).unwrap();
        let tr = d.transitions[0];
        assert!(matches!(
            b.append_online(tr),
            Err(SeqEvalError::Protocol(_))
        ));
        b.extend(100).unwrap();
        // Drain the extension backlog so the queue is empty, as it is when
        // the offline phase hands over to fine-tuning.
        let mut rng = stream_rng(6, "s", 0);
        while b.pending_len() > 0 {
            b.sample_batch(4, true, &mut rng).unwrap();
        }
        let idx = b.append_online(tr).unwrap();
        assert_eq!(idx, 10);
        assert_eq!(b.visible(), 11);
        // The appended transition is guaranteed into the next ensure-new batch.
        let batch = b.sample_batch(4, true, &mut rng).unwrap();
        assert!(batch.contains(&10));
    }

    #[test]
    fn million_transition_buffer_starts_at_5000() {
        // Synthetic transitions; only sizes matter here.
        let transitions: Vec<Transition> = (0..1_000_000u64)
            .map(|i| Transition {
                state: 0,
                action: 0,
                reward: 0.0,
                next_state: 1,
                done: i % 10 == 9,
                episode_id: i / 10,
                step_index: (i % 10) as usize,
            })
            .collect();
        let len = transitions.len();
        let d = OfflineDataset {
            transitions,
            segments: vec![crate::dataset::Segment {
                label: Tier::Random,
                start: 0,
                end: len,
            }],
            meta: crate::dataset::DatasetMeta {
                env_name: "big".into(),
                tier: Tier::Random,
                n_states: 2,
                n_actions: 1,
                random_ref: 0.0,
                expert_ref: 1.0,
                dataset_policy_score: 0.0,
            },
        };
        let mut b = SequentialBuffer::new(&d, 5_000).unwrap();
        assert_eq!(b.visible(), 5_000);
        assert_eq!(b.extend(1).unwrap(), ExtendOutcome::Extended(5_000..5_001));
        let full = SequentialBuffer::new(&d, len).unwrap();
        assert_eq!(full.visible(), len);
        assert!(full.offline_exhausted());
    }

    #[test]
    fn same_seed_same_batches() {
        let d = dataset(80);
        let mut b1 = SequentialBuffer::new(&d, 40).unwrap();
        let mut b2 = SequentialBuffer::new(&d, 40).unwrap();
        let mut r1 = stream_rng(7, "s", 0);
        let mut r2 = stream_rng(7, "s", 0);
        for _ in 0..20 {
            b1.extend(2).unwrap();
            b2.extend(2).unwrap();
            assert_eq!(
                b1.sample_batch(8, true, &mut r1).unwrap(),
                b2.sample_batch(8, true, &mut r2).unwrap()
            );
        }
    }
}
