//! Policy scoring: Monte Carlo rollouts when a simulator is available, and
//! fitted Q evaluation from the dataset alone when it is not.

use rand_chacha::ChaCha8Rng;

use crate::dataset::OfflineDataset;
use crate::error::{Result, SeqEvalError};
use crate::mdp::{rollout_with_id, MdpSpec};
use crate::policy::Policy;

/// Mean and population standard deviation of the undiscounted return over
/// `n_episodes` independent rollouts.
pub fn evaluate_policy(
    mdp: &MdpSpec,
    policy: &Policy,
    n_episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    if n_episodes == 0 {
        return Err(SeqEvalError::InvalidInput(
            "n_episodes must be at least 1".into(),
        ));
    }
    let mut returns = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        returns.push(rollout_with_id(mdp, policy, i as u64, rng)?.total_return);
    }
    let mean = returns.iter().sum::<f64>() / n_episodes as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n_episodes as f64;
    Ok((mean, var.sqrt()))
}

/// Fitted-Q-evaluation outcome with convergence and coverage diagnostics.
#[derive(Debug, Clone)]
pub struct FqeReport {
    /// `sum_s start_prob(s) * sum_a pi(a|s) * Qhat(s, a)`.
    pub score: f64,
    /// Sweeps actually run (early exit on a sup-norm change below 1e-12).
    pub sweeps_run: usize,
    /// Sup-norm change of the table after each sweep.
    pub sweep_deltas: Vec<f64>,
    /// Non-terminal `(state, action)` pairs the policy uses that never
    /// appear in the dataset; their table entries stay at zero.
    pub uncovered_pairs: Vec<(usize, usize)>,
}

/// Fits a tabular Q estimate of `policy` by sweeping the evaluation Bellman
/// backup `Qhat(s,a) <- r + (1 - done) * discount * E_pi[Qhat(s', .)]` over
/// the dataset transitions in order, starting from zero, and returns the
/// estimated value of the start-state distribution.
///
/// The estimator reads the whole dataset on every sweep. Only the start
/// distribution and the table dimensions are taken from `mdp`; dynamics are
/// never consulted. Entries for pairs missing from the data stay at zero
/// and are reported in [`FqeReport::uncovered_pairs`].
pub fn fqe_evaluate(
    dataset: &OfflineDataset,
    mdp: &MdpSpec,
    policy: &Policy,
    discount: f64,
    iterations: usize,
) -> Result<FqeReport> {
    if dataset.is_empty() {
        return Err(SeqEvalError::InvalidInput("empty dataset".into()));
    }
    policy.check_compatible(mdp)?;
    if !(0.0..=1.0).contains(&discount) {
        return Err(SeqEvalError::InvalidInput(format!(
            "discount {discount} outside [0, 1]"
        )));
    }
    let n_states = mdp.n_states;
    let n_actions = mdp.n_actions;
    let mut q = vec![vec![0.0; n_actions]; n_states];
    let mut sweep_deltas = Vec::new();
    let mut sweeps_run = 0;
    for _ in 0..iterations {
        let mut delta = 0.0f64;
        for t in &dataset.transitions {
            let future = if t.done {
                0.0
            } else {
                expected_value(&q[t.next_state], policy, t.next_state)?
            };
            let updated = t.reward + (1.0 - f64::from(t.done)) * discount * future;
            delta = delta.max((updated - q[t.state][t.action]).abs());
            q[t.state][t.action] = updated;
        }
        sweeps_run += 1;
        sweep_deltas.push(delta);
        if delta < 1e-12 {
            break;
        }
    }

    let mut seen = vec![vec![false; n_actions]; n_states];
    for t in &dataset.transitions {
        seen[t.state][t.action] = true;
    }
    let mut uncovered_pairs = Vec::new();
    for s in 0..n_states {
        if mdp.is_terminal(s) {
            continue;
        }
        for (a, &p) in policy.action_probs(s)?.iter().enumerate() {
            if p > 0.0 && !seen[s][a] {
                uncovered_pairs.push((s, a));
            }
        }
    }

    let mut score = 0.0;
    for (s, &p) in mdp.start_distribution.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        score += p * expected_value(&q[s], policy, s)?;
    }
    Ok(FqeReport {
        score,
        sweeps_run,
        sweep_deltas,
        uncovered_pairs,
    })
}

/// The scalar FQE metric; see [`fqe_evaluate`].
pub fn fqe_score(
    dataset: &OfflineDataset,
    mdp: &MdpSpec,
    policy: &Policy,
    discount: f64,
    iterations: usize,
) -> Result<f64> {
    Ok(fqe_evaluate(dataset, mdp, policy, discount, iterations)?.score)
}

fn expected_value(row: &[f64], policy: &Policy, state: usize) -> Result<f64> {
    let probs = policy.action_probs(state)?;
    Ok(row.iter().zip(&probs).map(|(&q, &p)| q * p).sum())
}
