//! Action-selection policies over tabular state spaces.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SeqEvalError};
use crate::mdp::MdpSpec;

const PROB_TOL: f64 = 1e-9;

/// A policy usable for rollouts: an explicit stochastic table, the greedy
/// policy induced by a Q table, or an epsilon-greedy mixture of the two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// `probs[state][action]`; every row sums to one.
    TabularStochastic { probs: Vec<Vec<f64>> },
    /// Argmax over `q[state]`, ties broken by the lowest action index.
    GreedyFromQ { q: Vec<Vec<f64>> },
    /// With probability `epsilon` a uniform action, otherwise greedy.
    EpsilonGreedyFromQ { q: Vec<Vec<f64>>, epsilon: f64 },
}

/// Index of the row maximum, ties broken by the lowest index.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Policy {
    pub fn tabular(probs: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(SeqEvalError::InvalidInput(format!(
                    "policy row for state {s} sums to {sum}, expected 1"
                )));
            }
            if row.iter().any(|&p| p < 0.0) {
                return Err(SeqEvalError::InvalidInput(format!(
                    "policy row for state {s} has a negative probability"
                )));
            }
        }
        Ok(Policy::TabularStochastic { probs })
    }

    /// Uniform-random policy: a tabular policy with uniform rows.
    pub fn uniform_random(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(SeqEvalError::InvalidInput(
                "uniform policy needs at least one state and one action".into(),
            ));
        }
        Ok(Policy::TabularStochastic {
            probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        })
    }

    pub fn greedy_from_q(q: Vec<Vec<f64>>) -> Result<Self> {
        if q.is_empty() {
            return Err(SeqEvalError::InvalidInput("empty Q table".into()));
        }
        Ok(Policy::GreedyFromQ { q })
    }

    pub fn epsilon_greedy_from_q(q: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(SeqEvalError::InvalidInput(format!(
                "epsilon {epsilon} outside [0, 1]"
            )));
        }
        if q.is_empty() {
            return Err(SeqEvalError::InvalidInput("empty Q table".into()));
        }
        Ok(Policy::EpsilonGreedyFromQ { q, epsilon })
    }

    pub fn check_compatible(&self, mdp: &MdpSpec) -> Result<()> {
        let (states, actions) = match self {
            Policy::TabularStochastic { probs } => {
                (probs.len(), probs.first().map_or(0, Vec::len))
            }
            Policy::GreedyFromQ { q } | Policy::EpsilonGreedyFromQ { q, .. } => {
                (q.len(), q.first().map_or(0, Vec::len))
            }
        };
        if states != mdp.n_states || actions != mdp.n_actions {
            return Err(SeqEvalError::InvalidInput(format!(
                "policy shape ({states}, {actions}) does not match mdp '{}' ({}, {})",
                mdp.name, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Policy::TabularStochastic { probs } => probs.first().map_or(0, Vec::len),
            Policy::GreedyFromQ { q } | Policy::EpsilonGreedyFromQ { q, .. } => {
                q.first().map_or(0, Vec::len)
            }
        }
    }

    /// Action probabilities at `state`.
    pub fn action_probs(&self, state: usize) -> Result<Vec<f64>> {
        match self {
            Policy::TabularStochastic { probs } => probs
                .get(state)
                .cloned()
                .ok_or_else(|| SeqEvalError::InvalidInput(format!("state {state} out of range"))),
            Policy::GreedyFromQ { q } => {
                let row = q.get(state).ok_or_else(|| {
                    SeqEvalError::InvalidInput(format!("state {state} out of range"))
                })?;
                let mut probs = vec![0.0; row.len()];
                probs[argmax_lowest(row)] = 1.0;
                Ok(probs)
            }
            Policy::EpsilonGreedyFromQ { q, epsilon } => {
                let row = q.get(state).ok_or_else(|| {
                    SeqEvalError::InvalidInput(format!("state {state} out of range"))
                })?;
                let n = row.len();
                let mut probs = vec![epsilon / n as f64; n];
                probs[argmax_lowest(row)] += 1.0 - epsilon;
                Ok(probs)
            }
        }
    }

    pub fn sample_action(&self, state: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        match self {
            Policy::TabularStochastic { probs } => {
                let row = probs.get(state).ok_or_else(|| {
                    SeqEvalError::InvalidInput(format!("state {state} out of range"))
                })?;
                let mut u: f64 = rng.gen();
                for (a, &p) in row.iter().enumerate() {
                    if u < p {
                        return Ok(a);
                    }
                    u -= p;
                }
                Ok(row.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            }
            Policy::GreedyFromQ { q } => {
                let row = q.get(state).ok_or_else(|| {
                    SeqEvalError::InvalidInput(format!("state {state} out of range"))
                })?;
                Ok(argmax_lowest(row))
            }
            Policy::EpsilonGreedyFromQ { q, epsilon } => {
                let row = q.get(state).ok_or_else(|| {
                    SeqEvalError::InvalidInput(format!("state {state} out of range"))
                })?;
                if rng.gen::<f64>() < *epsilon {
                    Ok(rng.gen_range(0..row.len()))
                } else {
                    Ok(argmax_lowest(row))
                }
            }
        }
    }
}
