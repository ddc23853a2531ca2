//! Tabular, model-based marginal importance sampling.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Transition;
use crate::env::{MdpShape, Policy};
use crate::error::{Error, Result};
use crate::estimators::check_gamma;
use crate::estimators::stats::PairStats;

/// ω̂(s, a) = d̂^π(s) π(a|s) / max(b̂(s, a), floor).
#[derive(Debug, Clone, PartialEq)]
pub struct RatioFunction {
    n_states: usize,
    n_actions: usize,
    table: Vec<f64>,
    floor: f64,
}

impl RatioFunction {
    pub fn new(n_states: usize, n_actions: usize, table: Vec<f64>, floor: f64) -> Result<Self> {
        if table.len() != n_states * n_actions {
            return Err(Error::InvalidParameter(format!(
                "ratio table has {} entries, expected {}",
                table.len(),
                n_states * n_actions
            )));
        }
        if !(floor > 0.0) {
            return Err(Error::InvalidParameter(format!("ratio floor must be > 0, got {floor}")));
        }
        if table.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("ratio entries must be finite and >= 0".into()));
        }
        Ok(RatioFunction {
            n_states,
            n_actions,
            table,
            floor,
        })
    }

    /// The constant ratio c on every pair.
    pub fn constant(n_states: usize, n_actions: usize, c: f64) -> Result<Self> {
        Self::new(n_states, n_actions, vec![c; n_states * n_actions], 1.0)
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.table[s * self.n_actions + a]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Default behavior-density floor, 1/(10 n).
pub fn default_floor(n_tuples: usize) -> f64 {
    1.0 / (10.0 * n_tuples.max(1) as f64)
}

/// Estimates P̂ and b̂ from the data, solves the discounted flow equations
/// d = (1−γ)𝔾 + γ P̂_πᵀ d, and forms ω̂. Rows of P̂ for unvisited pairs are
/// uniform over states.
pub fn mis_ratio(
    data: &[Transition],
    policy: &Policy,
    shape: &MdpShape,
    gamma: f64,
    floor: Option<f64>,
) -> Result<RatioFunction> {
    check_gamma(gamma)?;
    let (ns, na) = (shape.n_states, shape.n_actions);
    if shape.initial_dist.len() != ns {
        return Err(Error::InvalidParameter("initial distribution length mismatch".into()));
    }
    policy.check_shape(ns, na)?;
    let stats = PairStats::from_transitions(data, ns, na)?;
    let floor = floor.unwrap_or_else(|| default_floor(stats.n_tuples));
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("ratio floor must be > 0, got {floor}")));
    }
    let pi = policy.to_tabular();

    // (I − γ P̂_πᵀ) d = (1−γ) 𝔾
    let mut system = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for a in 0..na {
            let p_a = pi.prob(s, a);
            if p_a == 0.0 {
                continue;
            }
            let pair = s * na + a;
            let c = stats.count[pair];
            for s2 in 0..ns {
                let p_next = if c > 0.0 {
                    stats.next_counts(pair)[s2] / c
                } else {
                    1.0 / ns as f64
                };
                system[(s2, s)] -= gamma * p_a * p_next;
            }
        }
    }
    let rhs = DVector::from_iterator(ns, shape.initial_dist.iter().map(|g| (1.0 - gamma) * g));
    let d = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("discounted visitation system".into()))?;

    let n = stats.n_tuples as f64;
    let mut uncovered = 0usize;
    let table = (0..ns * na)
        .map(|pair| {
            let (s, a) = (pair / na, pair % na);
            let target = d[s].max(0.0) * pi.prob(s, a);
            if target > 0.0 && stats.count[pair] == 0.0 {
                uncovered += 1;
            }
            target / (stats.count[pair] / n).max(floor)
        })
        .collect();
    if uncovered > 0 {
        log::warn!("{uncovered} target-supported state-action pairs are absent from the data; their ratios use the floor");
    }
    RatioFunction::new(ns, na, table, floor)
}

/// ω̂(S, A)·R for every tuple, in data order.
pub fn mis_weighted_rewards(data: &[Transition], ratio: &RatioFunction) -> Vec<f64> {
    data.iter().map(|t| ratio.get(t.state, t.action) * t.reward).collect()
}

/// (1−γ)⁻¹ · mean of ω̂(S, A)·R.
pub fn mis_value(data: &[Transition], ratio: &RatioFunction, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if data.is_empty() {
        return Err(Error::Empty("data view has no transitions"));
    }
    for t in data {
        if t.state >= ratio.n_states || t.action >= ratio.n_actions {
            return Err(Error::OutOfDomain {
                state: t.state,
                action: t.action,
                n_states: ratio.n_states,
                n_actions: ratio.n_actions,
            });
        }
    }
    let total: f64 = mis_weighted_rewards(data, ratio).iter().sum();
    Ok(total / data.len() as f64 / (1.0 - gamma))
}
