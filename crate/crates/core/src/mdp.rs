//! Tabular Markov decision processes, trajectory rollouts, and returns.
//!
//! An [`MdpSpec`] stores the full transition and reward structure of a small
//! finite MDP, so dataset generation, learning, and evaluation can all be
//! checked against exact dynamic-programming solutions. Rewards are a
//! deterministic function of `(state, action, next_state)`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SeqEvalError};
use crate::policy::Policy;

const PROB_TOL: f64 = 1e-9;

/// One possible result of taking an action: next state, its probability,
/// and the reward collected on the way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next_state: usize,
    pub probability: f64,
    pub reward: f64,
}

/// A finite MDP with episodic dynamics.
///
/// `transitions[s][a]` lists the outcomes of action `a` in state `s`.
/// Terminal states absorb: they carry no outgoing mass and rollouts end on
/// entering them. Episodes are additionally cut after `horizon` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub name: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<Vec<Outcome>>>,
    pub start_distribution: Vec<f64>,
    pub terminal: Vec<bool>,
    pub horizon: usize,
}

/// A single logged step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
    pub episode_id: u64,
    pub step_index: usize,
}

/// An ordered trajectory with its undiscounted return.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub total_return: f64,
}

impl MdpSpec {
    /// Checks the distribution and shape invariants.
    ///
    /// Every non-terminal `(state, action)` pair must carry outgoing mass
    /// summing to one; the start distribution must sum to one; all state ids
    /// must be in range.
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(SeqEvalError::InvalidInput(
                "mdp needs at least one state and one action".into(),
            ));
        }
        if self.transitions.len() != self.n_states
            || self.terminal.len() != self.n_states
            || self.start_distribution.len() != self.n_states
        {
            return Err(SeqEvalError::InvalidInput(format!(
                "mdp '{}': table sizes do not match n_states = {}",
                self.name, self.n_states
            )));
        }
        let start_sum: f64 = self.start_distribution.iter().sum();
        if (start_sum - 1.0).abs() > PROB_TOL {
            return Err(SeqEvalError::InvalidInput(format!(
                "start distribution sums to {start_sum}, expected 1"
            )));
        }
        for (s, rows) in self.transitions.iter().enumerate() {
            if self.terminal[s] {
                continue;
            }
            if rows.len() != self.n_actions {
                return Err(SeqEvalError::InvalidInput(format!(
                    "state {s}: expected {} action rows, found {}",
                    self.n_actions,
                    rows.len()
                )));
            }
            for (a, outcomes) in rows.iter().enumerate() {
                let mass: f64 = outcomes.iter().map(|o| o.probability).sum();
                if (mass - 1.0).abs() > PROB_TOL {
                    return Err(SeqEvalError::InvalidInput(format!(
                        "transition distribution for ({s}, {a}) sums to {mass}, expected 1"
                    )));
                }
                for o in outcomes {
                    if o.next_state >= self.n_states {
                        return Err(SeqEvalError::InvalidInput(format!(
                            "transition ({s}, {a}) references state {} >= n_states",
                            o.next_state
                        )));
                    }
                    if o.probability < 0.0 {
                        return Err(SeqEvalError::InvalidInput(format!(
                            "transition ({s}, {a}) has negative probability"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    /// Samples a start state from the start distribution.
    pub fn sample_start(&self, rng: &mut ChaCha8Rng) -> usize {
        let mut u: f64 = rng.gen();
        for (s, &p) in self.start_distribution.iter().enumerate() {
            if u < p {
                return s;
            }
            u -= p;
        }
        // Guard against accumulated rounding in the final bin.
        self.start_distribution
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }
}

/// Samples one environment step.
///
/// Returns `(next_state, reward, done)` where `done` reports whether the
/// sampled next state is terminal. Horizon truncation is the caller's
/// bookkeeping, since the step itself does not know the step index.
pub fn step(
    mdp: &MdpSpec,
    state: usize,
    action: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, f64, bool)> {
    if state >= mdp.n_states {
        return Err(SeqEvalError::InvalidInput(format!(
            "state {state} >= n_states {}",
            mdp.n_states
        )));
    }
    if action >= mdp.n_actions {
        return Err(SeqEvalError::InvalidInput(format!(
            "action {action} >= n_actions {}",
            mdp.n_actions
        )));
    }
    if mdp.is_terminal(state) {
        return Err(SeqEvalError::InvalidInput(format!(
            "cannot step from terminal state {state}"
        )));
    }
    let outcomes = &mdp.transitions[state][action];
    let mut u: f64 = rng.gen();
    let mut chosen = outcomes.last().expect("validated non-empty row");
    for o in outcomes {
        if u < o.probability {
            chosen = o;
            break;
        }
        u -= o.probability;
    }
    Ok((
        chosen.next_state,
        chosen.reward,
        mdp.is_terminal(chosen.next_state),
    ))
}

/// Rolls one episode from a start-distribution sample until a terminal state
/// or the horizon. `episode_id` is stamped onto every transition.
pub fn rollout_with_id(
    mdp: &MdpSpec,
    policy: &Policy,
    episode_id: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Episode> {
    policy.check_compatible(mdp)?;
    let mut transitions = Vec::new();
    let mut total_return = 0.0;
    let mut state = mdp.sample_start(rng);
    for step_index in 0..mdp.horizon {
        if mdp.is_terminal(state) {
            break;
        }
        let action = policy.sample_action(state, rng)?;
        let (next_state, reward, terminal) = step(mdp, state, action, rng)?;
        let done = terminal || step_index == mdp.horizon - 1;
        transitions.push(Transition {
            state,
            action,
            reward,
            next_state,
            done,
            episode_id,
            step_index,
        });
        total_return += reward;
        if done {
            break;
        }
        state = next_state;
    }
    Ok(Episode {
        transitions,
        total_return,
    })
}

/// Rolls one episode; see [`rollout_with_id`].
pub fn rollout(mdp: &MdpSpec, policy: &Policy, rng: &mut ChaCha8Rng) -> Result<Episode> {
    rollout_with_id(mdp, policy, 0, rng)
}

/// Sum of `discount^t * reward_t`. An empty list yields 0.
pub fn discounted_return(rewards: &[f64], discount: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&discount) {
        return Err(SeqEvalError::InvalidInput(format!(
            "discount {discount} outside [0, 1]"
        )));
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for &r in rewards {
        total += weight * r;
        weight *= discount;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Structured text format
// ---------------------------------------------------------------------------

impl MdpSpec {
    /// Serializes to the structured text format (see `read_from`).
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut out = String::new();
        writeln!(out, "# mdp v1").unwrap();
        writeln!(out, "name {}", self.name).unwrap();
        writeln!(out, "states {}", self.n_states).unwrap();
        writeln!(out, "actions {}", self.n_actions).unwrap();
        writeln!(out, "horizon {}", self.horizon).unwrap();
        for (s, &p) in self.start_distribution.iter().enumerate() {
            if p != 0.0 {
                writeln!(out, "start {s} {p}").unwrap();
            }
        }
        let terminals: BTreeSet<usize> = self
            .terminal
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(s, _)| s)
            .collect();
        for s in terminals {
            writeln!(out, "terminal {s}").unwrap();
        }
        for (s, rows) in self.transitions.iter().enumerate() {
            if self.terminal[s] {
                continue;
            }
            for (a, outcomes) in rows.iter().enumerate() {
                for o in outcomes {
                    writeln!(
                        out,
                        "transition {s} {a} {} {} {}",
                        o.next_state, o.probability, o.reward
                    )
                    .unwrap();
                }
            }
        }
        w.write_all(out.as_bytes())
    }

    /// Parses the structured text format written by `write_to`:
    /// `name`, `states`, `actions`, `horizon` headers followed by `start`,
    /// `terminal`, and `transition s a s' p r` records. The result is
    /// validated before being returned.
    pub fn read_from(r: impl BufRead, path: &str) -> Result<Self> {
        let fail = |line: usize, message: String| SeqEvalError::Format {
            path: path.to_string(),
            line,
            message,
        };
        let mut name = None;
        let mut n_states = None;
        let mut n_actions = None;
        let mut horizon = None;
        let mut starts: Vec<(usize, f64)> = Vec::new();
        let mut terminals: Vec<usize> = Vec::new();
        let mut triples: Vec<(usize, usize, Outcome)> = Vec::new();

        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| SeqEvalError::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap();
            let rest: Vec<&str> = parts.collect();
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| fail(lineno, format!("expected a count, found '{v}'")))
            };
            let parse_f64 = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| fail(lineno, format!("expected a number, found '{v}'")))
            };
            match key {
                "name" => name = Some(rest.join(" ")),
                "states" if rest.len() == 1 => n_states = Some(parse_usize(rest[0])?),
                "actions" if rest.len() == 1 => n_actions = Some(parse_usize(rest[0])?),
                "horizon" if rest.len() == 1 => horizon = Some(parse_usize(rest[0])?),
                "start" if rest.len() == 2 => {
                    starts.push((parse_usize(rest[0])?, parse_f64(rest[1])?))
                }
                "terminal" if rest.len() == 1 => terminals.push(parse_usize(rest[0])?),
                "transition" if rest.len() == 5 => {
                    let s = parse_usize(rest[0])?;
                    let a = parse_usize(rest[1])?;
                    triples.push((
                        s,
                        a,
                        Outcome {
                            next_state: parse_usize(rest[2])?,
                            probability: parse_f64(rest[3])?,
                            reward: parse_f64(rest[4])?,
                        },
                    ));
                }
                _ => return Err(fail(lineno, format!("unrecognized record '{line}'"))),
            }
        }

        let n_states = n_states.ok_or_else(|| fail(0, "missing 'states' header".into()))?;
        let n_actions = n_actions.ok_or_else(|| fail(0, "missing 'actions' header".into()))?;
        let horizon = horizon.ok_or_else(|| fail(0, "missing 'horizon' header".into()))?;
        let mut start_distribution = vec![0.0; n_states];
        for (s, p) in starts {
            if s >= n_states {
                return Err(fail(0, format!("start state {s} >= states {n_states}")));
            }
            start_distribution[s] = p;
        }
        let mut terminal = vec![false; n_states];
        for s in terminals {
            if s >= n_states {
                return Err(fail(0, format!("terminal state {s} >= states {n_states}")));
            }
            terminal[s] = true;
        }
        let mut transitions = vec![vec![Vec::new(); n_actions]; n_states];
        for (s, a, o) in triples {
            if s >= n_states || a >= n_actions {
                return Err(fail(0, format!("transition ({s}, {a}) out of range")));
            }
            transitions[s][a].push(o);
        }
        let spec = MdpSpec {
            name: name.unwrap_or_else(|| "unnamed".into()),
            n_states,
            n_actions,
            transitions,
            start_distribution,
            terminal,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
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
        Self::read_from(
            std::io::BufReader::new(file),
            &path.display().to_string(),
        )
    }
}
