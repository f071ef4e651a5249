//! Offline dataset construction, mixing, shuffling, persistence, and score
//! normalization.
//!
//! Datasets are ordered transition logs with episode structure, labeled
//! segments (so distribution-shift schedules survive shuffling), and
//! metadata carrying the reference scores used for normalization. They are
//! immutable after construction.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SeqEvalError};
use crate::mdp::{rollout_with_id, MdpSpec, Transition};
use crate::policy::Policy;

/// Data-quality tiers, ordered roughly by the quality of the generating
/// policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Random,
    Medium,
    MediumReplay,
    MediumExpert,
    Expert,
    Mixed,
}

impl Tier {
    pub const ALL: [Tier; 6] = [
        Tier::Random,
        Tier::Medium,
        Tier::MediumReplay,
        Tier::MediumExpert,
        Tier::Expert,
        Tier::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Random => "random",
            Tier::Medium => "medium",
            Tier::MediumReplay => "medium-replay",
            Tier::MediumExpert => "medium-expert",
            Tier::Expert => "expert",
            Tier::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = SeqEvalError;

    fn from_str(s: &str) -> Result<Self> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SeqEvalError::Config(format!("unknown tier name '{s}'")))
    }
}

/// Environment-level reference scores used to normalize raw returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScores {
    pub env_name: String,
    pub n_states: usize,
    pub n_actions: usize,
    /// Mean return of the random policy.
    pub random_ref: f64,
    /// Mean return of the expert policy; must exceed `random_ref`.
    pub expert_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub env_name: String,
    pub tier: Tier,
    pub n_states: usize,
    pub n_actions: usize,
    pub random_ref: f64,
    pub expert_ref: f64,
    /// Mean episodic return of the policy that generated the data.
    pub dataset_policy_score: f64,
}

impl DatasetMeta {
    fn from_refs(refs: &ReferenceScores, tier: Tier, dataset_policy_score: f64) -> Result<Self> {
        let meta = DatasetMeta {
            env_name: refs.env_name.clone(),
            tier,
            n_states: refs.n_states,
            n_actions: refs.n_actions,
            random_ref: refs.random_ref,
            expert_ref: refs.expert_ref,
            dataset_policy_score,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.expert_ref <= self.random_ref {
            return Err(SeqEvalError::InvalidInput(format!(
                "expert_ref {} must exceed random_ref {}",
                self.expert_ref, self.random_ref
            )));
        }
        Ok(())
    }
}

/// A labeled, contiguous slice of the transition log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: Tier,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub transitions: Vec<Transition>,
    pub segments: Vec<Segment>,
    pub meta: DatasetMeta,
}

impl OfflineDataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Number of distinct episode ids.
    pub fn episode_count(&self) -> usize {
        let mut ids: Vec<u64> = self.transitions.iter().map(|t| t.episode_id).collect();
        ids.dedup();
        ids.len()
    }

    /// Checks segment partition, id bounds, and meta invariants.
    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        let mut cursor = 0;
        for seg in &self.segments {
            if seg.start != cursor || seg.end < seg.start {
                return Err(SeqEvalError::InvalidInput(format!(
                    "segments do not partition the dataset: [{}, {}) after {cursor}",
                    seg.start, seg.end
                )));
            }
            cursor = seg.end;
        }
        if cursor != self.transitions.len() {
            return Err(SeqEvalError::InvalidInput(format!(
                "segments cover {cursor} of {} transitions",
                self.transitions.len()
            )));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if t.state >= self.meta.n_states
                || t.next_state >= self.meta.n_states
                || t.action >= self.meta.n_actions
            {
                return Err(SeqEvalError::InvalidInput(format!(
                    "transition {i} references out-of-range state or action"
                )));
            }
        }
        Ok(())
    }
}

/// Generates a dataset of exactly `n_transitions` by concatenating whole
/// rollouts and cutting the overshoot. `dataset_policy_score` is the mean
/// return of the episodes that remain complete after the cut.
pub fn generate_dataset(
    mdp: &MdpSpec,
    policy: &Policy,
    n_transitions: usize,
    tier: Tier,
    refs: &ReferenceScores,
    rng: &mut ChaCha8Rng,
) -> Result<OfflineDataset> {
    if n_transitions == 0 {
        return Err(SeqEvalError::InvalidInput(
            "n_transitions must be positive".into(),
        ));
    }
    policy.check_compatible(mdp)?;
    if refs.env_name != mdp.name {
        return Err(SeqEvalError::InvalidInput(format!(
            "reference scores are for '{}', not '{}'",
            refs.env_name, mdp.name
        )));
    }
    let mut transitions = Vec::with_capacity(n_transitions);
    let mut episode_returns = Vec::new();
    let mut episode_id = 0u64;
    while transitions.len() < n_transitions {
        let episode = rollout_with_id(mdp, policy, episode_id, rng)?;
        if episode.transitions.is_empty() {
            return Err(SeqEvalError::InvalidInput(
                "policy produced an empty episode; cannot fill the dataset".into(),
            ));
        }
        let fits = transitions.len() + episode.transitions.len() <= n_transitions;
        if fits {
            episode_returns.push(episode.total_return);
        }
        transitions.extend(episode.transitions);
        episode_id += 1;
    }
    transitions.truncate(n_transitions);
    let score = if episode_returns.is_empty() {
        // Dataset shorter than a single episode; fall back to the return of
        // the episode that was cut.
        let cut: f64 = transitions.iter().map(|t| t.reward).sum();
        cut
    } else {
        episode_returns.iter().sum::<f64>() / episode_returns.len() as f64
    };
    let dataset = OfflineDataset {
        transitions,
        segments: vec![Segment {
            label: tier,
            start: 0,
            end: n_transitions,
        }],
        meta: DatasetMeta::from_refs(refs, tier, score)?,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Concatenates whole-episode prefixes of `parts` so that part `i`
/// contributes fraction `proportions[i]` of the output.
///
/// The output size is the largest total the parts can support at the given
/// proportions; each prefix is then cut at the episode boundary nearest its
/// target. Segments record the tier of each part, in order.
pub fn make_mixed(parts: &[OfflineDataset], proportions: &[f64]) -> Result<OfflineDataset> {
    if parts.is_empty() || parts.len() != proportions.len() {
        return Err(SeqEvalError::InvalidInput(
            "make_mixed needs one proportion per part".into(),
        ));
    }
    let total_prop: f64 = proportions.iter().sum();
    if (total_prop - 1.0).abs() > 1e-9 {
        return Err(SeqEvalError::InvalidInput(format!(
            "proportions sum to {total_prop}, expected 1"
        )));
    }
    if proportions.iter().any(|&p| p < 0.0) {
        return Err(SeqEvalError::InvalidInput("negative proportion".into()));
    }
    let first = &parts[0].meta;
    for part in parts {
        if part.meta.env_name != first.env_name
            || part.meta.n_states != first.n_states
            || part.meta.n_actions != first.n_actions
            || part.meta.random_ref != first.random_ref
            || part.meta.expert_ref != first.expert_ref
        {
            return Err(SeqEvalError::InvalidInput(format!(
                "mixed parts disagree on environment: '{}' vs '{}'",
                part.meta.env_name, first.env_name
            )));
        }
    }
    // Largest feasible output honoring every proportion.
    let feasible = parts
        .iter()
        .zip(proportions)
        .filter(|(_, &p)| p > 0.0)
        .map(|(part, &p)| (part.len() as f64 / p).floor() as usize)
        .min()
        .unwrap_or(0);

    let mut transitions = Vec::new();
    let mut segments = Vec::new();
    let mut episode_returns = Vec::new();
    let mut next_episode_id = 0u64;
    for (part, &prop) in parts.iter().zip(proportions) {
        let start = transitions.len();
        if prop > 0.0 {
            let target = prop * feasible as f64;
            let cut = nearest_episode_boundary(&part.transitions, target);
            let mut id_map: BTreeMap<u64, u64> = BTreeMap::new();
            for t in &part.transitions[..cut] {
                let new_id = *id_map.entry(t.episode_id).or_insert_with(|| {
                    let id = next_episode_id;
                    next_episode_id += 1;
                    id
                });
                let mut t = *t;
                t.episode_id = new_id;
                transitions.push(t);
            }
            episode_returns.extend(complete_episode_returns(&part.transitions[..cut]));
        }
        segments.push(Segment {
            label: part.meta.tier,
            start,
            end: transitions.len(),
        });
    }
    let score = if episode_returns.is_empty() {
        0.0
    } else {
        episode_returns.iter().sum::<f64>() / episode_returns.len() as f64
    };
    let meta = DatasetMeta {
        env_name: first.env_name.clone(),
        tier: Tier::Mixed,
        n_states: first.n_states,
        n_actions: first.n_actions,
        random_ref: first.random_ref,
        expert_ref: first.expert_ref,
        dataset_policy_score: score,
    };
    let dataset = OfflineDataset {
        transitions,
        segments,
        meta,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Cumulative episode boundary closest to `target` (0 and `len` included).
fn nearest_episode_boundary(transitions: &[Transition], target: f64) -> usize {
    let mut boundaries = vec![0usize];
    for (i, pair) in transitions.windows(2).enumerate() {
        if pair[0].episode_id != pair[1].episode_id {
            boundaries.push(i + 1);
        }
    }
    boundaries.push(transitions.len());
    boundaries
        .into_iter()
        .min_by(|&a, &b| {
            let da = (a as f64 - target).abs();
            let db = (b as f64 - target).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap_or(0)
}

/// Returns of the episodes fully contained in `transitions`.
pub(crate) fn complete_episode_returns(transitions: &[Transition]) -> Vec<f64> {
    let mut returns = Vec::new();
    let mut current_id = None;
    let mut acc = 0.0;
    let mut closed = false;
    for t in transitions {
        if current_id != Some(t.episode_id) {
            if current_id.is_some() && closed {
                returns.push(acc);
            }
            current_id = Some(t.episode_id);
            acc = 0.0;
        }
        acc += t.reward;
        closed = t.done;
    }
    if current_id.is_some() && closed {
        returns.push(acc);
    }
    returns
}

/// Permutes episodes within each segment; transition order inside an episode
/// and segment boundaries are untouched. Episode ids are renumbered to stay
/// strictly increasing. The same seed always yields the same permutation.
pub fn shuffle_dataset(dataset: &OfflineDataset, seed: u64) -> OfflineDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(dataset.len());
    for seg in &dataset.segments {
        let slice = &dataset.transitions[seg.start..seg.end];
        // Group contiguous runs with the same episode id.
        let mut blocks: Vec<&[Transition]> = Vec::new();
        let mut begin = 0;
        for i in 1..=slice.len() {
            if i == slice.len() || slice[i].episode_id != slice[begin].episode_id {
                blocks.push(&slice[begin..i]);
                begin = i;
            }
        }
        blocks.shuffle(&mut rng);
        for block in blocks {
            transitions.extend_from_slice(block);
        }
    }
    // Renumber episode ids in the new order.
    let mut next_id = 0u64;
    let mut previous: Option<u64> = None;
    for t in &mut transitions {
        if previous != Some(t.episode_id) {
            previous = Some(t.episode_id);
            t.episode_id = next_id;
            next_id += 1;
        } else {
            t.episode_id = next_id - 1;
        }
    }
    OfflineDataset {
        transitions,
        segments: dataset.segments.clone(),
        meta: dataset.meta.clone(),
    }
}

/// Normalized score: `100 * (raw - random_ref) / (expert_ref - random_ref)`.
pub fn normalize_score(raw: f64, meta: &DatasetMeta) -> Result<f64> {
    let span = meta.expert_ref - meta.random_ref;
    if span == 0.0 {
        return Err(SeqEvalError::DegenerateReference(format!(
            "expert_ref equals random_ref ({})",
            meta.expert_ref
        )));
    }
    Ok(100.0 * (raw - meta.random_ref) / span)
}

// ---------------------------------------------------------------------------
// Structured text format
// ---------------------------------------------------------------------------

impl OfflineDataset {
    /// Serializes to the dataset text format: header records, segment
    /// records, then one `t ...` record per transition with fields
    /// `state action reward next_state done episode_id step_index`.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut out = String::new();
        use std::fmt::Write as _;
        writeln!(out, "# dataset v1").unwrap();
        writeln!(out, "env_name {}", self.meta.env_name).unwrap();
        writeln!(out, "tier {}", self.meta.tier).unwrap();
        writeln!(out, "states {}", self.meta.n_states).unwrap();
        writeln!(out, "actions {}", self.meta.n_actions).unwrap();
        writeln!(out, "random_ref {}", self.meta.random_ref).unwrap();
        writeln!(out, "expert_ref {}", self.meta.expert_ref).unwrap();
        writeln!(out, "dataset_policy_score {}", self.meta.dataset_policy_score).unwrap();
        writeln!(out, "transitions {}", self.transitions.len()).unwrap();
        for seg in &self.segments {
            writeln!(out, "segment {} {} {}", seg.label, seg.start, seg.end).unwrap();
        }
        for t in &self.transitions {
            writeln!(
                out,
                "t {} {} {} {} {} {} {}",
                t.state,
                t.action,
                t.reward,
                t.next_state,
                u8::from(t.done),
                t.episode_id,
                t.step_index
            )
            .unwrap();
        }
        w.write_all(out.as_bytes())
    }

    /// Parses the format written by `write_to`, validating counts, bounds,
    /// and segment structure. The first malformed record is named in the
    /// error; nothing partial is returned.
    pub fn read_from(r: impl BufRead, path: &str) -> Result<Self> {
        let fail = |line: usize, message: String| SeqEvalError::Format {
            path: path.to_string(),
            line,
            message,
        };
        let mut env_name = None;
        let mut tier = None;
        let mut n_states = None;
        let mut n_actions = None;
        let mut random_ref = None;
        let mut expert_ref = None;
        let mut dataset_policy_score = None;
        let mut declared = None;
        let mut segments = Vec::new();
        let mut transitions = Vec::new();

        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| SeqEvalError::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| fail(lineno, format!("expected a count, found '{v}'")))
            };
            let parse_f64 = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| fail(lineno, format!("expected a number, found '{v}'")))
            };
            match fields[0] {
                "env_name" if fields.len() >= 2 => env_name = Some(fields[1..].join(" ")),
                "tier" if fields.len() == 2 => {
                    tier = Some(
                        Tier::from_str(fields[1])
                            .map_err(|_| fail(lineno, format!("unknown tier '{}'", fields[1])))?,
                    )
                }
                "states" if fields.len() == 2 => n_states = Some(parse_usize(fields[1])?),
                "actions" if fields.len() == 2 => n_actions = Some(parse_usize(fields[1])?),
                "random_ref" if fields.len() == 2 => random_ref = Some(parse_f64(fields[1])?),
                "expert_ref" if fields.len() == 2 => expert_ref = Some(parse_f64(fields[1])?),
                "dataset_policy_score" if fields.len() == 2 => {
                    dataset_policy_score = Some(parse_f64(fields[1])?)
                }
                "transitions" if fields.len() == 2 => declared = Some(parse_usize(fields[1])?),
                "segment" if fields.len() == 4 => {
                    let label = Tier::from_str(fields[1])
                        .map_err(|_| fail(lineno, format!("unknown tier '{}'", fields[1])))?;
                    segments.push(Segment {
                        label,
                        start: parse_usize(fields[2])?,
                        end: parse_usize(fields[3])?,
                    });
                }
                "t" if fields.len() == 8 => {
                    let done = match fields[5] {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(fail(lineno, format!("done flag must be 0 or 1, found '{other}'")))
                        }
                    };
                    transitions.push(Transition {
                        state: parse_usize(fields[1])?,
                        action: parse_usize(fields[2])?,
                        reward: parse_f64(fields[3])?,
                        next_state: parse_usize(fields[4])?,
                        done,
                        episode_id: fields[6]
                            .parse::<u64>()
                            .map_err(|_| fail(lineno, format!("bad episode id '{}'", fields[6])))?,
                        step_index: parse_usize(fields[7])?,
                    });
                }
                _ => return Err(fail(lineno, format!("unrecognized record '{line}'"))),
            }
        }

        let missing = |what: &str| fail(0, format!("missing '{what}' header"));
        let meta = DatasetMeta {
            env_name: env_name.ok_or_else(|| missing("env_name"))?,
            tier: tier.ok_or_else(|| missing("tier"))?,
            n_states: n_states.ok_or_else(|| missing("states"))?,
            n_actions: n_actions.ok_or_else(|| missing("actions"))?,
            random_ref: random_ref.ok_or_else(|| missing("random_ref"))?,
            expert_ref: expert_ref.ok_or_else(|| missing("expert_ref"))?,
            dataset_policy_score: dataset_policy_score
                .ok_or_else(|| missing("dataset_policy_score"))?,
        };
        let declared = declared.ok_or_else(|| missing("transitions"))?;
        if transitions.len() != declared {
            return Err(fail(
                0,
                format!(
                    "file declares {declared} transitions but contains {}",
                    transitions.len()
                ),
            ));
        }
        let dataset = OfflineDataset {
            transitions,
            segments,
            meta,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn persist(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path)
            .map_err(|e| SeqEvalError::io(path.display().to_string(), e))?;
        self.write_to(&mut file)
            .map_err(|e| SeqEvalError::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| SeqEvalError::io(path.display().to_string(), e))?;
        Self::read_from(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// Monte Carlo reference scores for an environment: mean returns of the
/// random policy and of the supplied expert policy over `episodes` rollouts
/// each.
pub fn compute_reference_scores(
    mdp: &MdpSpec,
    expert: &Policy,
    episodes: usize,
    seed: u64,
) -> Result<ReferenceScores> {
    let random = Policy::uniform_random(mdp.n_states, mdp.n_actions)?;
    let mut random_rng = crate::seeding::stream_rng(seed, "refs-random", 0);
    let mut expert_rng = crate::seeding::stream_rng(seed, "refs-expert", 0);
    let mut random_sum = 0.0;
    let mut expert_sum = 0.0;
    for i in 0..episodes {
        random_sum += rollout_with_id(mdp, &random, i as u64, &mut random_rng)?.total_return;
        expert_sum += rollout_with_id(mdp, expert, i as u64, &mut expert_rng)?.total_return;
    }
    let refs = ReferenceScores {
        env_name: mdp.name.clone(),
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        random_ref: random_sum / episodes as f64,
        expert_ref: expert_sum / episodes as f64,
    };
    if refs.expert_ref <= refs.random_ref {
        return Err(SeqEvalError::DegenerateReference(format!(
            "expert policy scored {} against random {}",
            refs.expert_ref, refs.random_ref
        )));
    }
    Ok(refs)
}
