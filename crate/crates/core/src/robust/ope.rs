//! Median-of-means style off-policy evaluation: fit a base estimator on each
//! of K folds, then aggregate.

use crate::dataset::{bootstrap_folds, partition, OfflineDataset, Transition};
use crate::env::{integrate, MdpShape, Policy, TabularPolicy};
use crate::error::{Error, Result};
use crate::estimators::ridge::RidgeProblem;
use crate::estimators::stats::PairStats;
use crate::estimators::{
    check_gamma, check_map, fqe, lstd_eval, mis_ratio, mis_value, mis_weighted_rewards, FitConfig,
};
use crate::features::FeatureMap;
use crate::qfunction::{QFunction, QTable};
use crate::robust::aggregate::{aggregate_tables, aggregate_unchecked, AggRule};

/// How the K data views are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FoldScheme {
    /// Disjoint trajectory folds.
    #[default]
    Partition,
    /// K resamples of whole trajectories with replacement.
    Bootstrap,
}

/// Base evaluator used inside each fold of the direct method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmBase {
    Lstd,
    Fqe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub k: usize,
    pub rule: AggRule,
    pub scheme: FoldScheme,
    /// Seed of the fold split or bootstrap draw.
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(k: usize, rule: AggRule, seed: u64) -> Self {
        EnsembleSpec {
            k,
            rule,
            scheme: FoldScheme::Partition,
            seed,
        }
    }

    pub fn bootstrap(mut self) -> Self {
        self.scheme = FoldScheme::Bootstrap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        self.rule.validate()
    }
}

/// Tuples of each of the K data views.
pub fn fold_views(data: &OfflineDataset, k: usize, scheme: FoldScheme, seed: u64) -> Result<Vec<Vec<Transition>>> {
    match scheme {
        FoldScheme::Partition => Ok(partition(data, k, seed)?.fold_tuples(data)),
        FoldScheme::Bootstrap => {
            Ok(bootstrap_folds(data, k, seed)?.into_iter().map(|d| d.tuples().to_vec()).collect())
        }
    }
}

/// K fold-trained Q-functions combined pointwise by a rule.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleQ {
    pub members: Vec<QFunction>,
    pub rule: AggRule,
}

impl EnsembleQ {
    pub fn new(members: Vec<QFunction>, rule: AggRule) -> Result<Self> {
        let first = members.first().ok_or(Error::Empty("ensemble has no members"))?;
        let (ns, na) = (first.n_states(), first.n_actions());
        if members.iter().any(|m| m.n_states() != ns || m.n_actions() != na) {
            return Err(Error::InvalidParameter("ensemble members disagree on the domain".into()));
        }
        rule.validate()?;
        Ok(EnsembleQ { members, rule })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn member_tables(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| m.table().into_values()).collect()
    }

    /// Pointwise aggregate over members.
    pub fn table(&self) -> QTable {
        let first = &self.members[0];
        QTable::new(
            first.n_states(),
            first.n_actions(),
            aggregate_tables(&self.member_tables(), self.rule),
        )
        .expect("member tables share one shape")
    }
}

pub(crate) fn fit_folds<T>(
    views: &[Vec<Transition>],
    fit: impl Fn(&[Transition]) -> Result<T>,
) -> Result<Vec<T>> {
    views
        .iter()
        .enumerate()
        .map(|(i, v)| fit(v).map_err(|e| e.in_fold(i)))
        .collect()
}

/// Fold-trained evaluation ensemble for `policy`.
pub fn dm_ensemble(
    data: &OfflineDataset,
    policy: &Policy,
    map: &FeatureMap,
    gamma: f64,
    fit: &FitConfig,
    base: DmBase,
    spec: &EnsembleSpec,
) -> Result<EnsembleQ> {
    spec.validate()?;
    let views = fold_views(data, spec.k, spec.scheme, spec.seed)?;
    let members = fit_folds(&views, |v| match base {
        DmBase::Lstd => lstd_eval(v, policy, map, gamma, fit).map(|f| f.q),
        DmBase::Fqe => fqe(v, policy, map, gamma, fit),
    })?;
    EnsembleQ::new(members, spec.rule)
}

/// Aggregates Q̂_k(s, a) pointwise, then integrates over 𝔾 and π.
pub fn roam_dm(
    data: &OfflineDataset,
    policy: &Policy,
    map: &FeatureMap,
    initial_dist: &[f64],
    gamma: f64,
    fit: &FitConfig,
    base: DmBase,
    spec: &EnsembleSpec,
) -> Result<f64> {
    let ens = dm_ensemble(data, policy, map, gamma, fit, base, spec)?;
    Ok(integrate(&ens.table(), &policy.to_tabular(), initial_dist))
}

/// Integrates each Q̂_k over 𝔾 and π, then aggregates the K values.
pub fn roam_variant(
    data: &OfflineDataset,
    policy: &Policy,
    map: &FeatureMap,
    initial_dist: &[f64],
    gamma: f64,
    fit: &FitConfig,
    base: DmBase,
    spec: &EnsembleSpec,
) -> Result<f64> {
    let ens = dm_ensemble(data, policy, map, gamma, fit, base, spec)?;
    let pi = policy.to_tabular();
    let values: Vec<f64> = ens.members.iter().map(|m| integrate(&m.table(), &pi, initial_dist)).collect();
    Ok(aggregate_unchecked(&values, spec.rule))
}

/// Per-fold MIS values.
pub fn mis_fold_values(
    data: &OfflineDataset,
    policy: &Policy,
    shape: &MdpShape,
    gamma: f64,
    floor: Option<f64>,
    k: usize,
    scheme: FoldScheme,
    seed: u64,
) -> Result<Vec<f64>> {
    let views = fold_views(data, k, scheme, seed)?;
    fit_folds(&views, |v| {
        let ratio = mis_ratio(v, policy, shape, gamma, floor)?;
        mis_value(v, &ratio, gamma)
    })
}

/// Ratio estimation and MIS value on each fold, then aggregation.
pub fn roam_mis(
    data: &OfflineDataset,
    policy: &Policy,
    shape: &MdpShape,
    gamma: f64,
    floor: Option<f64>,
    spec: &EnsembleSpec,
) -> Result<f64> {
    spec.validate()?;
    let values = mis_fold_values(data, policy, shape, gamma, floor, spec.k, spec.scheme, spec.seed)?;
    Ok(aggregate_unchecked(&values, spec.rule))
}

/// Single ratio fit on all data; the per-tuple terms ω̂R are averaged after
/// trimming `trim` of them from each tail, then scaled by (1−γ)⁻¹.
pub fn tm_mis(
    data: &OfflineDataset,
    policy: &Policy,
    shape: &MdpShape,
    gamma: f64,
    floor: Option<f64>,
    trim: f64,
) -> Result<f64> {
    let rule = AggRule::truncated_mean(trim)?;
    let ratio = mis_ratio(data.tuples(), policy, shape, gamma, floor)?;
    let terms = mis_weighted_rewards(data.tuples(), &ratio);
    Ok(aggregate_unchecked(&terms, rule) / (1.0 - gamma))
}

/// Lockstep ensemble of fitted-Q evaluators. Every round, each fold
/// regresses R + γ·agg_k(Σ_a π(a|S') Q̂_k(S', a)) on its own tuples, with the
/// aggregate taken over the previous round's members.
pub fn roam_fqe_ensemble(
    data: &OfflineDataset,
    policy: &Policy,
    map: &FeatureMap,
    gamma: f64,
    fit: &FitConfig,
    spec: &EnsembleSpec,
) -> Result<EnsembleQ> {
    spec.validate()?;
    fit.validate()?;
    check_gamma(gamma)?;
    check_map(map, data.n_states(), data.n_actions())?;
    policy.check_shape(map.n_states(), map.n_actions())?;
    let pi = policy.to_tabular();
    let views = fold_views(data, spec.k, spec.scheme, spec.seed)?;
    let rule = spec.rule;
    lockstep(&views, map, gamma, fit, |tables| {
        let expected: Vec<Vec<f64>> = tables.iter().map(|q| policy_expectation(q, &pi)).collect();
        aggregate_tables(&expected, rule)
    })
    .and_then(|members| EnsembleQ::new(members, rule))
}

/// ROAM-FQE: lockstep ensemble, then pointwise aggregation integrated over
/// 𝔾 and π.
pub fn roam_fqe(
    data: &OfflineDataset,
    policy: &Policy,
    map: &FeatureMap,
    initial_dist: &[f64],
    gamma: f64,
    fit: &FitConfig,
    spec: &EnsembleSpec,
) -> Result<f64> {
    let ens = roam_fqe_ensemble(data, policy, map, gamma, fit, spec)?;
    Ok(integrate(&ens.table(), &policy.to_tabular(), initial_dist))
}

pub(crate) fn policy_expectation(q: &[f64], pi: &TabularPolicy) -> Vec<f64> {
    let na = pi.n_actions();
    q.chunks(na)
        .enumerate()
        .map(|(s, row)| row.iter().zip(pi.row(s)).map(|(v, p)| v * p).sum())
        .collect()
}

/// Runs `n_iterations` synchronized rounds of ridge regressions over the
/// folds. `next_value` maps the previous round's per-fold Q tables to the
/// shared next-state value V(s').
pub(crate) fn lockstep(
    views: &[Vec<Transition>],
    map: &FeatureMap,
    gamma: f64,
    fit: &FitConfig,
    next_value: impl Fn(&[Vec<f64>]) -> Vec<f64>,
) -> Result<Vec<QFunction>> {
    let problems = fit_folds(views, |v| {
        let stats = PairStats::from_transitions(v, map.n_states(), map.n_actions())?;
        let ridge = RidgeProblem::new(&stats, map, fit.ridge_lambda)?;
        Ok((stats, ridge))
    })?;
    let n_pairs = map.n_states() * map.n_actions();
    let mut tables = vec![vec![0.0; n_pairs]; views.len()];
    let mut thetas = vec![vec![0.0; map.dim()]; views.len()];
    for _ in 0..fit.n_iterations {
        let v = next_value(&tables);
        for ((stats, ridge), (theta, table)) in problems.iter().zip(thetas.iter_mut().zip(tables.iter_mut())) {
            *theta = ridge.solve(&stats.target_sums(&v, gamma));
            *table = ridge.evaluate(theta);
        }
    }
    thetas.into_iter().map(|t| QFunction::linear(t, map.clone())).collect()
}
