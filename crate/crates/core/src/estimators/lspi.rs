use crate::dataset::Transition;
use crate::env::TabularPolicy;
use crate::error::Result;
use crate::estimators::lstd::lstd_from_stats;
use crate::estimators::stats::PairStats;
use crate::estimators::{check_gamma, FitConfig};
use crate::features::FeatureMap;
use crate::qfunction::QFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct LspiFit {
    /// Q of the last evaluated policy.
    pub q: QFunction,
    /// The last evaluated (deterministic) policy.
    pub actions: Vec<usize>,
    pub stabilized: bool,
    pub iterations: usize,
}

/// Least-squares policy iteration: alternate LSTD evaluation of the current
/// greedy policy with greedy improvement, starting from "action 0
/// everywhere", until the greedy policy repeats or `n_iterations` runs out.
pub fn lspi(data: &[Transition], map: &FeatureMap, gamma: f64, cfg: &FitConfig) -> Result<LspiFit> {
    cfg.validate()?;
    check_gamma(gamma)?;
    let stats = PairStats::from_transitions(data, map.n_states(), map.n_actions())?;
    let mut actions = vec![0; map.n_states()];
    let mut iterations = 0;
    loop {
        let pi = TabularPolicy::deterministic(&actions, map.n_actions())?;
        let fit = lstd_from_stats(&stats, &pi, map, gamma, cfg.ridge_lambda)?;
        iterations += 1;
        let improved = fit.q.greedy_actions();
        let stabilized = improved == actions;
        if stabilized || iterations >= cfg.n_iterations {
            return Ok(LspiFit {
                q: fit.q,
                actions,
                stabilized,
                iterations,
            });
        }
        actions = improved;
    }
}
