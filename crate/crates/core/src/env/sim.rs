//! Rollout simulation. Rewards along a rollout equal the mean reward
//! r(s, a); reward noise is injected later by the dataset module.

use rand::RngCore;

use crate::env::mdp::TabularMdp;
use crate::env::policy::{Policy, TabularPolicy};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, open_unit, rng_from_seed, sample_categorical};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub trajectory_id: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut total = 0.0;
        let mut discount = 1.0;
        for step in &self.steps {
            total += discount * step.reward;
            discount *= gamma;
        }
        total
    }

    pub fn is_chained(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].next_state == w[1].state)
    }
}

/// Simulates `horizon` steps from s₀ ∼ 𝔾 under `policy`.
pub fn rollout(mdp: &TabularMdp, policy: &Policy, horizon: usize, seed: u64) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    policy.check_shape(mdp.n_states(), mdp.n_actions())?;
    let pi = policy.to_tabular();
    let mut rng = rng_from_seed(seed);
    Ok(Trajectory {
        trajectory_id: 0,
        steps: simulate(mdp, &pi, horizon, &mut rng),
    })
}

pub(crate) fn simulate(
    mdp: &TabularMdp,
    pi: &TabularPolicy,
    horizon: usize,
    rng: &mut impl RngCore,
) -> Vec<Step> {
    let mut steps = Vec::with_capacity(horizon);
    let mut s = sample_categorical(mdp.initial_dist(), open_unit(rng));
    for _ in 0..horizon {
        let a = sample_categorical(pi.row(s), open_unit(rng));
        let next = sample_categorical(mdp.transition_row(s, a), open_unit(rng));
        steps.push(Step {
            state: s,
            action: a,
            reward: mdp.reward(s, a),
            next_state: next,
        });
        s = next;
    }
    steps
}

/// Smallest T with γ^T · max|r| / (1 − γ) ≤ `tail_tol`.
pub fn default_horizon(mdp: &TabularMdp, tail_tol: f64) -> usize {
    let gamma = mdp.gamma();
    let scale = mdp.max_abs_reward() / (1.0 - gamma);
    if scale <= tail_tol || gamma == 0.0 {
        return 1;
    }
    let t = ((tail_tol / scale).ln() / gamma.ln()).ceil();
    (t.max(1.0)) as usize
}

pub const DEFAULT_TAIL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloValue {
    pub mean: f64,
    pub std_error: f64,
    pub n_episodes: usize,
}

/// Average truncated discounted return over `n_episodes` rollouts.
pub fn mc_value(
    mdp: &TabularMdp,
    policy: &Policy,
    n_episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<MonteCarloValue> {
    if n_episodes == 0 {
        return Err(Error::InvalidParameter("n_episodes must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    policy.check_shape(mdp.n_states(), mdp.n_actions())?;
    let pi = policy.to_tabular();
    let mut rng = rng_from_seed(derive_seed(seed, 0x4d43));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_episodes {
        let mut ret = 0.0;
        let mut discount = 1.0;
        for step in simulate(mdp, &pi, horizon, &mut rng) {
            ret += discount * step.reward;
            discount *= mdp.gamma();
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    let n = n_episodes as f64;
    let mean = sum / n;
    let std_error = if n_episodes > 1 {
        ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloValue {
        mean,
        std_error,
        n_episodes,
    })
}
