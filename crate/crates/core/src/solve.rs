//! Exact dynamic-programming solutions for small MDPs.
//!
//! These solvers read the true transition and reward tables, unlike the
//! learners, which only ever see sampled transitions. Tests use them as
//! independent references for learned Q tables, Monte Carlo evaluation, and
//! fitted policy evaluation.

use crate::error::{Result, SeqEvalError};
use crate::mdp::MdpSpec;
use crate::policy::Policy;

/// Optimal Q table by value iteration: iterates
/// `Q(s,a) = sum_o p * (r + discount * max_a' Q(s',a'))` with terminal next
/// states contributing no future value, until the sup-norm change drops
/// below `tol` or `max_iter` sweeps have run.
pub fn q_value_iteration(mdp: &MdpSpec, discount: f64, tol: f64, max_iter: usize) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    for _ in 0..max_iter {
        let mut next = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
        let mut delta = 0.0f64;
        for s in 0..mdp.n_states {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..mdp.n_actions {
                let mut value = 0.0;
                for o in &mdp.transitions[s][a] {
                    let future = if mdp.is_terminal(o.next_state) {
                        0.0
                    } else {
                        q[o.next_state].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    };
                    value += o.probability * (o.reward + discount * future);
                }
                next[s][a] = value;
                delta = delta.max((value - q[s][a]).abs());
            }
        }
        q = next;
        if delta < tol {
            break;
        }
    }
    q
}

/// Exact discounted state values of `policy` by solving the linear system
/// `(I - discount * P_pi) V = R_pi` with Gaussian elimination. Terminal
/// states are pinned at zero.
pub fn policy_value_discounted(mdp: &MdpSpec, policy: &Policy, discount: f64) -> Result<Vec<f64>> {
    policy.check_compatible(mdp)?;
    let n = mdp.n_states;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s][s] = 1.0;
        if mdp.is_terminal(s) {
            continue;
        }
        let probs = policy.action_probs(s)?;
        for (act, &pa) in probs.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for o in &mdp.transitions[s][act] {
                b[s] += pa * o.probability * o.reward;
                if !mdp.is_terminal(o.next_state) {
                    a[s][o.next_state] -= discount * pa * o.probability;
                }
            }
        }
    }
    solve_dense(&mut a, &mut b)?;
    Ok(b)
}

/// Expected undiscounted episodic return of `policy` from the start
/// distribution, with the same horizon truncation as rollouts: exactly the
/// quantity Monte Carlo evaluation estimates.
pub fn policy_return_undiscounted(mdp: &MdpSpec, policy: &Policy) -> Result<f64> {
    policy.check_compatible(mdp)?;
    let n = mdp.n_states;
    let mut future = vec![0.0; n];
    for _ in 0..mdp.horizon {
        let mut now = vec![0.0; n];
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            let probs = policy.action_probs(s)?;
            let mut value = 0.0;
            for (act, &pa) in probs.iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for o in &mdp.transitions[s][act] {
                    let tail = if mdp.is_terminal(o.next_state) {
                        0.0
                    } else {
                        future[o.next_state]
                    };
                    value += pa * o.probability * (o.reward + tail);
                }
            }
            now[s] = value;
        }
        future = now;
    }
    Ok(mdp
        .start_distribution
        .iter()
        .zip(&future)
        .map(|(&p, &v)| p * v)
        .sum())
}

/// In-place Gaussian elimination with partial pivoting; solution lands in `b`.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(SeqEvalError::InvalidInput(
                "singular policy-evaluation system".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut value = b[col];
        for k in col + 1..n {
            value -= a[col][k] * b[k];
        }
        b[col] = value / a[col][col];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{chain, gridworld, GridworldConfig};
    use crate::policy::Policy;

    #[test]
    fn value_iteration_solves_the_chain_in_closed_form() {
        // Rightward moves cost -1 until the goal pays 10 on entry. From
        // state s the optimal return is a geometric sum with n - 1 - s terms.
        let mdp = chain("c", 5, -1.0, 11.0, 50);
        let q = q_value_iteration(&mdp, 0.9, 1e-13, 10_000);
        for s in 0..4 {
            let steps = 4 - s;
            let mut expected = 0.0;
            for k in 0..steps {
                let r = if k == steps - 1 { 10.0 } else { -1.0 };
                expected += 0.9f64.powi(k as i32) * r;
            }
            assert!(
                (q[s][1] - expected).abs() < 1e-9,
                "state {s}: q = {}, expected {expected}",
                q[s][1]
            );
        }
    }

    #[test]
    fn linear_solve_matches_value_iteration_fixed_point_for_greedy_policy() {
        let cfg = GridworldConfig::example("g", 4, 4);
        let mdp = gridworld(&cfg).unwrap();
        let q = q_value_iteration(&mdp, 0.95, 1e-13, 10_000);
        let greedy = Policy::greedy_from_q(q.clone()).unwrap();
        let v = policy_value_discounted(&mdp, &greedy, 0.95).unwrap();
        for s in 0..mdp.n_states {
            if mdp.is_terminal(s) {
                assert_eq!(v[s], 0.0);
                continue;
            }
            let best = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!((v[s] - best).abs() < 1e-8, "state {s}: {} vs {best}", v[s]);
        }
    }

    #[test]
    fn undiscounted_return_on_deterministic_path() {
        // Optimal policy on a 3x3 grid takes 4 steps at -1 each.
        let cfg = GridworldConfig::example("g", 3, 3);
        let mdp = gridworld(&cfg).unwrap();
        let q = q_value_iteration(&mdp, 1.0 - 1e-9, 1e-12, 10_000);
        let greedy = Policy::greedy_from_q(q).unwrap();
        let ret = policy_return_undiscounted(&mdp, &greedy).unwrap();
        assert!((ret - (-4.0)).abs() < 1e-9, "ret = {ret}");
    }
}
