//! Exact dynamic-programming oracles on a known MDP.

use nalgebra::{DMatrix, DVector};

use crate::env::mdp::TabularMdp;
use crate::env::policy::{Policy, TabularPolicy};
use crate::error::{Error, Result};
use crate::qfunction::{argmax_lowest, QFunction, QTable};

pub const VALUE_ITERATION_TOL: f64 = 1e-10;
pub const VALUE_ITERATION_MAX_ITERS: usize = 100_000;

/// Solves (I − γ P^π) Q = r exactly.
pub fn exact_q_eval(mdp: &TabularMdp, policy: &Policy) -> Result<QFunction> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    policy.check_shape(ns, na)?;
    let pi = policy.to_tabular();
    let n = ns * na;
    let gamma = mdp.gamma();
    let mut system = DMatrix::<f64>::identity(n, n);
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            for (s2, &p) in mdp.transition_row(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for a2 in 0..na {
                    system[(row, s2 * na + a2)] -= gamma * p * pi.prob(s2, a2);
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(mdp.mean_rewards());
    let q = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("policy evaluation system".into()))?;
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("policy evaluation produced non-finite values".into()));
    }
    Ok(QFunction::Tabular(QTable::new(ns, na, q.as_slice().to_vec())?))
}

/// J^π = Σ_s 𝔾(s) Σ_a π(a|s) Q^π(s, a).
pub fn exact_value(mdp: &TabularMdp, policy: &Policy) -> Result<f64> {
    let q = exact_q_eval(mdp, policy)?.table();
    Ok(integrate(&q, &policy.to_tabular(), mdp.initial_dist()))
}

/// E_{s∼𝔾, a∼π} Q(s, a) for an explicit table.
pub fn integrate(q: &QTable, pi: &TabularPolicy, initial_dist: &[f64]) -> f64 {
    initial_dist
        .iter()
        .enumerate()
        .filter(|(_, &g)| g != 0.0)
        .map(|(s, &g)| g * pi.row(s).iter().zip(q.row(s)).map(|(p, v)| p * v).sum::<f64>())
        .sum()
}

/// Value iteration on Q, stopping when the sup-norm change drops to
/// `VALUE_ITERATION_TOL` or after `VALUE_ITERATION_MAX_ITERS` sweeps.
/// Returns the greedy policy (lowest index on ties) and Q*.
pub fn optimal_policy(mdp: &TabularMdp) -> (Policy, QFunction) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let gamma = mdp.gamma();
    let mut q = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    for _ in 0..VALUE_ITERATION_MAX_ITERS {
        let mut delta = 0.0_f64;
        for s in 0..ns {
            for a in 0..na {
                let next: f64 = mdp.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                let updated = mdp.reward(s, a) + gamma * next;
                delta = delta.max((updated - q[s * na + a]).abs());
                q[s * na + a] = updated;
            }
        }
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = q[s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        if delta <= VALUE_ITERATION_TOL {
            break;
        }
    }
    let table = QTable::new(ns, na, q).expect("sized by construction");
    let actions: Vec<usize> = (0..ns).map(|s| argmax_lowest(table.row(s))).collect();
    let policy = Policy::deterministic(&actions, na).expect("greedy actions are in range");
    (policy, QFunction::Tabular(table))
}

/// sup over (s, a) of |Q − (r + γ P V)| where V(s') = Σ π(a'|s') Q(s', a').
pub fn bellman_residual(mdp: &TabularMdp, policy: &Policy, q: &QTable) -> f64 {
    let pi = policy.to_tabular();
    let v: Vec<f64> = (0..mdp.n_states())
        .map(|s| pi.row(s).iter().zip(q.row(s)).map(|(p, x)| p * x).sum())
        .collect();
    backup_residual(mdp, q, &v)
}

/// sup-norm residual of the Bellman optimality equation.
pub fn optimality_residual(mdp: &TabularMdp, q: &QTable) -> f64 {
    let v: Vec<f64> = (0..mdp.n_states())
        .map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    backup_residual(mdp, q, &v)
}

fn backup_residual(mdp: &TabularMdp, q: &QTable, v: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let next: f64 = mdp.transition_row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
            worst = worst.max((q.get(s, a) - mdp.reward(s, a) - mdp.gamma() * next).abs());
        }
    }
    worst
}

/// Distribution of S_t for t = 0..horizon under π, starting from 𝔾.
pub fn state_marginals(mdp: &TabularMdp, policy: &Policy, horizon: usize) -> Vec<Vec<f64>> {
    let pi = policy.to_tabular();
    let ns = mdp.n_states();
    let mut out = Vec::with_capacity(horizon);
    let mut d = mdp.initial_dist().to_vec();
    for _ in 0..horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if d[s] == 0.0 {
                continue;
            }
            for a in 0..mdp.n_actions() {
                let w = d[s] * pi.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                for (s2, p) in mdp.transition_row(s, a).iter().enumerate() {
                    next[s2] += w * p;
                }
            }
        }
        out.push(std::mem::replace(&mut d, next));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(r: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(vec![vec![vec![1.0]]], vec![vec![r]], vec![1.0], gamma).unwrap()
    }

    #[test]
    fn geometric_series() {
        let mdp = single_state(1.0, 0.9);
        let pi = Policy::uniform(1, 1);
        let q = exact_q_eval(&mdp, &pi).unwrap();
        assert!((q.value(0, 0) - 10.0).abs() < 1e-12);
        assert!((exact_value(&mdp, &pi).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_discount_is_reward() {
        let mdp = TabularMdp::random(5, 3, 0.0, 4).unwrap();
        let pi = Policy::uniform(5, 3);
        let q = exact_q_eval(&mdp, &pi).unwrap().table();
        for s in 0..5 {
            for a in 0..3 {
                assert!((q.get(s, a) - mdp.reward(s, a)).abs() < 1e-15);
            }
        }
        let (greedy, _) = optimal_policy(&mdp);
        for s in 0..5 {
            let row: Vec<f64> = (0..3).map(|a| mdp.reward(s, a)).collect();
            assert_eq!(greedy.action_probabilities(s)[argmax_lowest(&row)], 1.0);
        }
    }

    #[test]
    fn point_mass_start_reads_one_entry() {
        let mdp = TabularMdp::random(4, 2, 0.8, 9)
            .unwrap()
            .with_initial_dist(vec![0.0, 0.0, 1.0, 0.0])
            .unwrap();
        let pi = Policy::deterministic(&[0, 1, 1, 0], 2).unwrap();
        let q = exact_q_eval(&mdp, &pi).unwrap();
        assert!((exact_value(&mdp, &pi).unwrap() - q.value(2, 1)).abs() < 1e-14);
    }

    #[test]
    fn dominant_action_chosen() {
        // action 0 pays strictly more everywhere and shares dynamics with action 1
        let p = vec![vec![vec![0.5, 0.5]; 2]; 2];
        let r = vec![vec![1.0, 0.5], vec![2.0, 0.0]];
        let mdp = TabularMdp::new(p, r, vec![0.5, 0.5], 0.9).unwrap();
        let (pi, q) = optimal_policy(&mdp);
        assert_eq!(pi.action_probabilities(0), vec![1.0, 0.0]);
        assert_eq!(pi.action_probabilities(1), vec![1.0, 0.0]);
        assert!(optimality_residual(&mdp, &q.table()) < 1e-8);
    }

    #[test]
    fn evaluation_is_a_fixed_point() {
        for seed in 0..5 {
            let mdp = TabularMdp::random(6, 3, 0.95, seed).unwrap();
            let pi = Policy::uniform(6, 3);
            let q = exact_q_eval(&mdp, &pi).unwrap().table();
            assert!(bellman_residual(&mdp, &pi, &q) < 1e-9);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mdp = single_state(1.0, 0.5);
        assert!(exact_q_eval(&mdp, &Policy::uniform(2, 1)).is_err());
    }
}
