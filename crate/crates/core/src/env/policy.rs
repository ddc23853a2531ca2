use crate::env::mdp::check_distribution;
use crate::error::{Error, Result};
use crate::qfunction::{argmax_lowest, QFunction};

/// Row-stochastic action table π(a|s).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, |r| r.len());
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidPolicy("empty action table".into()));
        }
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::InvalidPolicy("ragged action table".into()));
        }
        for (s, row) in rows.iter().enumerate() {
            check_distribution(row, &format!("pi(.|{s})"))
                .map_err(|e| Error::InvalidPolicy(e.to_string()))?;
        }
        Ok(TabularPolicy {
            n_states,
            n_actions,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        if actions.is_empty() || n_actions == 0 {
            return Err(Error::InvalidPolicy("empty action table".into()));
        }
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidPolicy(format!("action {a} at state {s} out of range")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(TabularPolicy {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        TabularPolicy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Tabular(TabularPolicy),
    /// (1 − ε)·base + ε·uniform.
    EpsilonGreedy { base: Box<Policy>, epsilon: f64 },
    /// Deterministic argmax of a Q-function, ties to the lowest action.
    GreedyOnQ(QFunction),
}

impl Policy {
    pub fn tabular(rows: Vec<Vec<f64>>) -> Result<Self> {
        TabularPolicy::new(rows).map(Policy::Tabular)
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        TabularPolicy::deterministic(actions, n_actions).map(Policy::Tabular)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy::Tabular(TabularPolicy::uniform(n_states, n_actions))
    }

    pub fn epsilon_greedy(base: Policy, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidPolicy(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        Ok(Policy::EpsilonGreedy {
            base: Box::new(base),
            epsilon,
        })
    }

    pub fn greedy_on(q: QFunction) -> Self {
        Policy::GreedyOnQ(q)
    }

    pub fn n_states(&self) -> usize {
        match self {
            Policy::Tabular(t) => t.n_states(),
            Policy::EpsilonGreedy { base, .. } => base.n_states(),
            Policy::GreedyOnQ(q) => q.n_states(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Policy::Tabular(t) => t.n_actions(),
            Policy::EpsilonGreedy { base, .. } => base.n_actions(),
            Policy::GreedyOnQ(q) => q.n_actions(),
        }
    }

    pub fn action_probabilities(&self, s: usize) -> Vec<f64> {
        match self {
            Policy::Tabular(t) => t.row(s).to_vec(),
            Policy::EpsilonGreedy { base, epsilon } => {
                let n = self.n_actions() as f64;
                base.action_probabilities(s)
                    .into_iter()
                    .map(|p| (1.0 - epsilon) * p + epsilon / n)
                    .collect()
            }
            Policy::GreedyOnQ(q) => {
                let t = q.table();
                let mut probs = vec![0.0; t.n_actions()];
                probs[argmax_lowest(t.row(s))] = 1.0;
                probs
            }
        }
    }

    /// Flattens any policy kind into an explicit action table.
    pub fn to_tabular(&self) -> TabularPolicy {
        match self {
            Policy::Tabular(t) => t.clone(),
            Policy::GreedyOnQ(q) => {
                TabularPolicy::deterministic(&q.greedy_actions(), q.n_actions())
                    .expect("greedy actions are in range")
            }
            Policy::EpsilonGreedy { .. } => {
                let n_states = self.n_states();
                let probs = (0..n_states).flat_map(|s| self.action_probabilities(s)).collect();
                TabularPolicy {
                    n_states,
                    n_actions: self.n_actions(),
                    probs,
                }
            }
        }
    }

    pub(crate) fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states() != n_states || self.n_actions() != n_actions {
            return Err(Error::InvalidPolicy(format!(
                "policy is {}x{}, environment is {}x{}",
                self.n_states(),
                self.n_actions(),
                n_states,
                n_actions
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfunction::QTable;

    #[test]
    fn epsilon_zero_matches_base() {
        let base = Policy::tabular(vec![vec![0.3, 0.7], vec![1.0, 0.0]]).unwrap();
        let eg = Policy::epsilon_greedy(base.clone(), 0.0).unwrap();
        for s in 0..2 {
            assert_eq!(eg.action_probabilities(s), base.action_probabilities(s));
        }
    }

    #[test]
    fn epsilon_greedy_mixes_uniform() {
        let base = Policy::deterministic(&[1, 0], 4).unwrap();
        let eg = Policy::epsilon_greedy(base, 0.2).unwrap();
        let p = eg.action_probabilities(0);
        assert!((p[1] - 0.85).abs() < 1e-15);
        assert!((p[0] - 0.05).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_on_q_breaks_ties_low() {
        let q = QTable::new(2, 3, vec![1.0, 1.0, 0.0, -1.0, 2.0, 2.0]).unwrap();
        let pi = Policy::greedy_on(QFunction::Tabular(q));
        assert_eq!(pi.action_probabilities(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(pi.action_probabilities(1), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn invalid_rows_rejected() {
        assert!(Policy::tabular(vec![vec![0.5, 0.6]]).is_err());
        assert!(Policy::tabular(vec![vec![1.5, -0.5]]).is_err());
        assert!(Policy::deterministic(&[2], 2).is_err());
        assert!(Policy::epsilon_greedy(Policy::uniform(1, 2), 1.5).is_err());
    }
}
