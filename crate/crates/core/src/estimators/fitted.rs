//! Fitted-Q evaluation and iteration: repeated ridge regressions of the
//! one-step Bellman target on φ(S, A), starting from Q ≡ 0.

use crate::dataset::Transition;
use crate::env::Policy;
use crate::error::Result;
use crate::estimators::ridge::RidgeProblem;
use crate::estimators::stats::PairStats;
use crate::estimators::{check_gamma, check_map, FitConfig};
use crate::features::FeatureMap;
use crate::qfunction::QFunction;

/// Target Y = R + γ Σ_a π(a|S') Q(S', a).
pub fn fqe(
    data: &[Transition],
    policy: &Policy,
    map: &FeatureMap,
    gamma: f64,
    cfg: &FitConfig,
) -> Result<QFunction> {
    policy.check_shape(map.n_states(), map.n_actions())?;
    let pi = policy.to_tabular();
    let na = map.n_actions();
    fitted(data, map, gamma, cfg, |q| {
        q.chunks(na)
            .enumerate()
            .map(|(s, row)| row.iter().zip(pi.row(s)).map(|(v, p)| v * p).sum())
            .collect()
    })
}

/// Target Y = R + γ max_a Q(S', a).
pub fn fqi(data: &[Transition], map: &FeatureMap, gamma: f64, cfg: &FitConfig) -> Result<QFunction> {
    let na = map.n_actions();
    fitted(data, map, gamma, cfg, |q| {
        q.chunks(na)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    })
}

fn fitted(
    data: &[Transition],
    map: &FeatureMap,
    gamma: f64,
    cfg: &FitConfig,
    next_value: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<QFunction> {
    cfg.validate()?;
    check_gamma(gamma)?;
    let stats = PairStats::from_transitions(data, map.n_states(), map.n_actions())?;
    check_map(map, stats.n_states, stats.n_actions)?;
    let ridge = RidgeProblem::new(&stats, map, cfg.ridge_lambda)?;
    let mut q = vec![0.0; stats.n_pairs()];
    let mut theta = vec![0.0; map.dim()];
    for _ in 0..cfg.n_iterations {
        let v = next_value(&q);
        theta = ridge.solve(&stats.target_sums(&v, gamma));
        q = ridge.evaluate(&theta);
    }
    QFunction::linear(theta, map.clone())
}
