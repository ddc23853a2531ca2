use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const SIMPLEX_TOL: f64 = 1e-12;

/// A finite discounted MDP with known dynamics.
///
/// Transitions are stored flat as `[s][a][s']`, mean rewards as `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    mean_reward: Vec<f64>,
    initial_dist: Vec<f64>,
    gamma: f64,
}

/// The parts of an MDP an estimator is allowed to know: the spaces and 𝔾.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpShape {
    pub n_states: usize,
    pub n_actions: usize,
    pub initial_dist: Vec<f64>,
}

pub(crate) fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        mean_reward: Vec<Vec<f64>>,
        initial_dist: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::InvalidMdp("no states".into()));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::InvalidMdp("no actions".into()));
        }
        if mean_reward.len() != n_states || initial_dist.len() != n_states {
            return Err(Error::InvalidMdp("reward/initial sizes disagree with transition".into()));
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, rows) in transition.iter().enumerate() {
            if rows.len() != n_actions || mean_reward[s].len() != n_actions {
                return Err(Error::InvalidMdp(format!("state {s} has a ragged action list")));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::InvalidMdp(format!("P(.|{s},{a}) has wrong length")));
                }
                flat.extend_from_slice(row);
            }
        }
        Self::from_flat(
            n_states,
            n_actions,
            flat,
            mean_reward.into_iter().flatten().collect(),
            initial_dist,
            gamma,
        )
    }

    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        mean_reward: Vec<f64>,
        initial_dist: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("empty state or action space".into()));
        }
        if transition.len() != n_states * n_actions * n_states
            || mean_reward.len() != n_states * n_actions
            || initial_dist.len() != n_states
        {
            return Err(Error::InvalidMdp("table sizes are inconsistent".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if mean_reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp("non-finite mean reward".into()));
        }
        for (i, row) in transition.chunks(n_states).enumerate() {
            check_distribution(row, &format!("P(.|{},{})", i / n_actions, i % n_actions))?;
        }
        check_distribution(&initial_dist, "initial distribution")?;
        Ok(TabularMdp {
            n_states,
            n_actions,
            transition,
            mean_reward,
            initial_dist,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.mean_reward[s * self.n_actions + a]
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_reward
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.mean_reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    pub fn shape(&self) -> MdpShape {
        MdpShape {
            n_states: self.n_states,
            n_actions: self.n_actions,
            initial_dist: self.initial_dist.clone(),
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::from_flat(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            self.mean_reward.clone(),
            self.initial_dist.clone(),
            gamma,
        )
    }

    pub fn with_initial_dist(&self, initial_dist: Vec<f64>) -> Result<Self> {
        Self::from_flat(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            self.mean_reward.clone(),
            initial_dist,
            self.gamma,
        )
    }

    /// Whether every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.transition
            .chunks(self.n_states)
            .all(|row| row.iter().any(|&p| p == 1.0))
    }

    /// Chain of `n_states` cells with actions left (0) and right (1).
    ///
    /// The intended move happens with probability `1 - slip`, otherwise the
    /// agent moves the opposite way; moves are clamped at both ends. Pushing
    /// left at cell 0 pays 0.2, pushing right at the last cell pays 1.0, all
    /// other pairs pay nothing. Episodes start uniformly over the cells.
    pub fn chain(n_states: usize, slip: f64, gamma: f64) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::InvalidMdp("chain needs at least 2 states".into()));
        }
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::InvalidMdp(format!("slip must lie in [0, 1], got {slip}")));
        }
        let n_actions = 2;
        let mut p = vec![0.0; n_states * n_actions * n_states];
        let mut r = vec![0.0; n_states * n_actions];
        let left = |s: usize| s.saturating_sub(1);
        let right = |s: usize| (s + 1).min(n_states - 1);
        for s in 0..n_states {
            for a in 0..n_actions {
                let (intended, opposite) = if a == 0 { (left(s), right(s)) } else { (right(s), left(s)) };
                let base = (s * n_actions + a) * n_states;
                p[base + intended] += 1.0 - slip;
                p[base + opposite] += slip;
            }
        }
        r[0] = 0.2;
        r[(n_states - 1) * n_actions + 1] = 1.0;
        Self::from_flat(n_states, n_actions, p, r, vec![1.0 / n_states as f64; n_states], gamma)
    }

    /// `side x side` grid with actions up, down, left, right.
    ///
    /// Moves succeed with probability `1 - slip` and otherwise leave the agent
    /// in place; walls clamp. The goal is the far corner: any action taken there
    /// pays `goal_reward` and returns the agent to the start corner (state 0).
    /// Every other pair pays `-step_cost`. Episodes start at state 0.
    pub fn grid(side: usize, goal_reward: f64, step_cost: f64, slip: f64, gamma: f64) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidMdp("grid side must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::InvalidMdp(format!("slip must lie in [0, 1], got {slip}")));
        }
        let n_states = side * side;
        let n_actions = 4;
        let goal = n_states - 1;
        let mut p = vec![0.0; n_states * n_actions * n_states];
        let mut r = vec![-step_cost; n_states * n_actions];
        for s in 0..n_states {
            let (row, col) = (s / side, s % side);
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                if s == goal {
                    p[base] = 1.0;
                    r[s * n_actions + a] = goal_reward;
                    continue;
                }
                let target = match a {
                    0 => row.saturating_sub(1) * side + col,
                    1 => (row + 1).min(side - 1) * side + col,
                    2 => row * side + col.saturating_sub(1),
                    _ => row * side + (col + 1).min(side - 1),
                };
                p[base + target] += 1.0 - slip;
                p[base + s] += slip;
            }
        }
        let mut init = vec![0.0; n_states];
        init[0] = 1.0;
        Self::from_flat(n_states, n_actions, p, r, init, gamma)
    }

    /// Random MDP: Dirichlet(1) transition rows, uniform[0, 1] mean rewards,
    /// uniform initial distribution.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("empty state or action space".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut p = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            // Dirichlet(1, ..., 1) as normalized unit exponentials
            let draws: Vec<f64> = (0..n_states).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            let mut row: Vec<f64> = draws.iter().map(|x| x / total).collect();
            let drift: f64 = 1.0 - row.iter().sum::<f64>();
            row[0] += drift;
            p.extend(row);
        }
        let r: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
        Self::from_flat(n_states, n_actions, p, r, vec![1.0 / n_states as f64; n_states], gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        assert!(TabularMdp::chain(5, 0.1, 0.9).is_ok());
        assert!(TabularMdp::grid(3, 1.0, 0.0, 0.1, 0.9).is_ok());
        for seed in 0..20 {
            assert!(TabularMdp::random(6, 3, 0.9, seed).is_ok());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = vec![vec![vec![0.5, 0.6]], vec![vec![1.0, 0.0]]];
        let r = vec![vec![0.0], vec![0.0]];
        assert!(TabularMdp::new(p, r.clone(), vec![0.5, 0.5], 0.9).is_err());
        let p = vec![vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]];
        assert!(TabularMdp::new(p.clone(), r.clone(), vec![0.5, 0.5], 1.0).is_err());
        assert!(TabularMdp::new(p.clone(), r.clone(), vec![1.5, -0.5], 0.5).is_err());
        assert!(TabularMdp::new(p, r, vec![0.5, 0.5], 0.5).is_ok());
    }

    #[test]
    fn random_is_seeded() {
        let a = TabularMdp::random(4, 2, 0.9, 11).unwrap();
        let b = TabularMdp::random(4, 2, 0.9, 11).unwrap();
        let c = TabularMdp::random(4, 2, 0.9, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn deterministic_chain_moves() {
        let m = TabularMdp::chain(4, 0.0, 0.9).unwrap();
        assert!(m.is_deterministic());
        assert_eq!(m.transition_row(0, 0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.transition_row(2, 1), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.reward(3, 1), 1.0);
    }
}
