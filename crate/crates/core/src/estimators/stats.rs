use crate::dataset::Transition;
use crate::error::{Error, Result};

/// Per-pair sufficient statistics of a batch of transitions. Every
/// least-squares estimator in this crate is a function of these counts, so
/// fits cost O(pairs · states) per iteration instead of O(tuples).
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_tuples: usize,
    /// Visits of pair `s * n_actions + a`.
    pub count: Vec<f64>,
    /// Sum of observed rewards per pair.
    pub reward_sum: Vec<f64>,
    /// Next-state visit counts, `[pair][s']`.
    pub next_count: Vec<f64>,
}

impl PairStats {
    pub fn from_transitions(data: &[Transition], n_states: usize, n_actions: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("data view has no transitions"));
        }
        let n_pairs = n_states * n_actions;
        let mut stats = PairStats {
            n_states,
            n_actions,
            n_tuples: data.len(),
            count: vec![0.0; n_pairs],
            reward_sum: vec![0.0; n_pairs],
            next_count: vec![0.0; n_pairs * n_states],
        };
        for t in data {
            if t.state >= n_states || t.next_state >= n_states || t.action >= n_actions {
                return Err(Error::OutOfDomain {
                    state: t.state.max(t.next_state),
                    action: t.action,
                    n_states,
                    n_actions,
                });
            }
            let p = t.state * n_actions + t.action;
            stats.count[p] += 1.0;
            stats.reward_sum[p] += t.reward;
            stats.next_count[p * n_states + t.next_state] += 1.0;
        }
        Ok(stats)
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn next_counts(&self, pair: usize) -> &[f64] {
        &self.next_count[pair * self.n_states..(pair + 1) * self.n_states]
    }

    /// Σ over tuples of the pair of R + γ·V(S').
    pub fn target_sums(&self, next_values: &[f64], gamma: f64) -> Vec<f64> {
        (0..self.n_pairs())
            .map(|p| {
                let cont: f64 = self.next_counts(p).iter().zip(next_values).map(|(c, v)| c * v).sum();
                self.reward_sum[p] + gamma * cont
            })
            .collect()
    }
}
