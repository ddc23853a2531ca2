use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataset::Transition;
use crate::env::{Policy, TabularPolicy};
use crate::error::{Error, Result};
use crate::estimators::ridge::feature_matrix;
use crate::estimators::stats::PairStats;
use crate::estimators::{check_gamma, check_map, FitConfig};
use crate::features::FeatureMap;
use crate::qfunction::QFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct LstdFit {
    pub q: QFunction,
    /// Smallest eigenvalue of E_D[φφᵀ] − γ E_D[ξξᵀ], ξ(S') = Σ_a π(a|S') φ(S', a).
    pub lambda_min: f64,
}

/// Solves Σ_D φ(S,A) [R + γ ξ(S')ᵀθ − φ(S,A)ᵀθ] = λθ for θ.
pub fn lstd_eval(
    data: &[Transition],
    policy: &Policy,
    map: &FeatureMap,
    gamma: f64,
    cfg: &FitConfig,
) -> Result<LstdFit> {
    cfg.validate()?;
    check_gamma(gamma)?;
    let stats = PairStats::from_transitions(data, map.n_states(), map.n_actions())?;
    policy.check_shape(map.n_states(), map.n_actions())?;
    lstd_from_stats(&stats, &policy.to_tabular(), map, gamma, cfg.ridge_lambda)
}

pub(crate) fn lstd_from_stats(
    stats: &PairStats,
    pi: &TabularPolicy,
    map: &FeatureMap,
    gamma: f64,
    ridge_lambda: f64,
) -> Result<LstdFit> {
    check_map(map, stats.n_states, stats.n_actions)?;
    let (ns, na) = (stats.n_states, stats.n_actions);
    let dim = map.dim();
    let f = feature_matrix(map);
    // ξ(s') for every state
    let xi: Vec<DVector<f64>> = (0..ns)
        .map(|s| {
            let mut v = DVector::zeros(dim);
            for a in 0..na {
                let p = pi.prob(s, a);
                if p != 0.0 {
                    v += p * f.row(s * na + a).transpose();
                }
            }
            v
        })
        .collect();

    let mut a_mat = DMatrix::<f64>::identity(dim, dim) * ridge_lambda;
    let mut b = DVector::<f64>::zeros(dim);
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut next_gram = DMatrix::<f64>::zeros(dim, dim);
    for p in 0..stats.n_pairs() {
        let c = stats.count[p];
        if c == 0.0 {
            continue;
        }
        let phi = f.row(p).transpose();
        let mut succ = DVector::<f64>::zeros(dim);
        for (s2, &n) in stats.next_counts(p).iter().enumerate() {
            if n != 0.0 {
                succ += n * &xi[s2];
                next_gram += n * &xi[s2] * xi[s2].transpose();
            }
        }
        a_mat += &phi * (c * &phi - gamma * succ).transpose();
        b += stats.reward_sum[p] * &phi;
        gram += c * &phi * phi.transpose();
    }

    let theta = a_mat
        .lu()
        .solve(&b)
        .filter(|t| t.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Singular("LSTD system matrix".into()))?;

    let n = stats.n_tuples as f64;
    let diag = (gram - gamma * next_gram) / n;
    let lambda_min = SymmetricEigen::new(diag).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(LstdFit {
        q: QFunction::linear(theta.as_slice().to_vec(), map.clone())?,
        lambda_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{exact_q_eval, TabularMdp};
    use crate::estimators::test_support::{exact_cfg, exhaustive};

    fn det_chain(gamma: f64) -> TabularMdp {
        TabularMdp::chain(5, 0.0, gamma).unwrap()
    }

    #[test]
    fn zero_discount_is_reward_regression() {
        let mdp = det_chain(0.0);
        let data = exhaustive(&mdp, 3, 1);
        let map = FeatureMap::one_hot(5, 2);
        let pi = Policy::uniform(5, 2);
        let fit = lstd_eval(data.tuples(), &pi, &map, 0.0, &exact_cfg()).unwrap();
        for (t, r) in fit.q.theta().unwrap().iter().zip(mdp.mean_rewards()) {
            assert!((t - r).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_exact_evaluation_on_exhaustive_data() {
        let mdp = det_chain(0.9);
        let data = exhaustive(&mdp, 2, 1);
        let map = FeatureMap::one_hot(5, 2);
        let pi = Policy::tabular(vec![vec![0.3, 0.7]; 5]).unwrap();
        let fit = lstd_eval(data.tuples(), &pi, &map, 0.9, &exact_cfg()).unwrap();
        let exact = exact_q_eval(&mdp, &pi).unwrap().table();
        let got = fit.q.table();
        for (a, b) in got.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn duplicated_data_gives_same_solution() {
        let mdp = TabularMdp::random(4, 2, 0.8, 3).unwrap();
        let data = exhaustive(&mdp, 5, 2);
        let mut doubled = data.tuples().to_vec();
        doubled.extend_from_slice(data.tuples());
        let map = FeatureMap::one_hot(4, 2);
        let pi = Policy::uniform(4, 2);
        let a = lstd_eval(data.tuples(), &pi, &map, 0.8, &exact_cfg()).unwrap();
        let b = lstd_eval(&doubled, &pi, &map, 0.8, &exact_cfg()).unwrap();
        for (x, y) in a.q.theta().unwrap().iter().zip(b.q.theta().unwrap()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn empirical_bellman_equation_holds() {
        let mdp = TabularMdp::random(4, 3, 0.9, 11).unwrap();
        let data = exhaustive(&mdp, 7, 5);
        let map = FeatureMap::one_hot(4, 3);
        let pi = Policy::uniform(4, 3);
        let q = lstd_eval(data.tuples(), &pi, &map, 0.9, &exact_cfg()).unwrap().q.table();
        let stats = PairStats::from_transitions(data.tuples(), 4, 3).unwrap();
        let v: Vec<f64> = (0..4).map(|s| q.row(s).iter().sum::<f64>() / 3.0).collect();
        let targets = stats.target_sums(&v, 0.9);
        for p in 0..12 {
            let backed_up = targets[p] / stats.count[p];
            assert!((q.values()[p] - backed_up).abs() <= 1e-8);
        }
    }

    #[test]
    fn min_eigenvalue_shrinks_with_discount() {
        let mdp = TabularMdp::random(5, 2, 0.5, 4).unwrap();
        let data = crate::dataset::collect(
            &mdp,
            &Policy::uniform(5, 2),
            20,
            30,
            &crate::noise::NoiseSpec::none(),
            9,
        )
        .unwrap();
        let map = FeatureMap::one_hot(5, 2);
        let pi = Policy::uniform(5, 2);
        let lam: Vec<f64> = [0.0, 0.5, 0.9]
            .iter()
            .map(|&g| lstd_eval(data.tuples(), &pi, &map, g, &FitConfig::default()).unwrap().lambda_min)
            .collect();
        assert!(lam[0] >= lam[1] && lam[1] >= lam[2], "{lam:?}");
        assert!(lam[0] > 0.0);
    }

    #[test]
    fn rejects_empty_and_mismatched_inputs() {
        let map = FeatureMap::one_hot(5, 2);
        let pi = Policy::uniform(5, 2);
        assert!(lstd_eval(&[], &pi, &map, 0.9, &FitConfig::default()).is_err());
        let data = exhaustive(&det_chain(0.9), 1, 0);
        let small = FeatureMap::one_hot(3, 2);
        let res = lstd_eval(data.tuples(), &Policy::uniform(3, 2), &small, 0.9, &FitConfig::default());
        assert!(matches!(res, Err(Error::OutOfDomain { .. })));
        assert!(lstd_eval(data.tuples(), &Policy::uniform(4, 2), &map, 0.9, &FitConfig::default()).is_err());
    }

    #[test]
    fn singular_system_is_reported() {
        // unvisited pairs leave zero rows when no ridge is applied
        let mdp = det_chain(0.9);
        let data = exhaustive(&mdp, 1, 0);
        let some: Vec<_> = data.tuples()[..3].to_vec();
        let res = lstd_eval(&some, &Policy::uniform(5, 2), &FeatureMap::one_hot(5, 2), 0.9, &exact_cfg());
        assert!(matches!(res, Err(Error::Singular(_))));
    }
}
