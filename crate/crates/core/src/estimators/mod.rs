//! Non-robust base estimators: LSTD, fitted-Q evaluation and iteration,
//! least-squares policy iteration, tabular marginal importance sampling and
//! on-policy Monte-Carlo fold values.

pub mod fitted;
pub mod lspi;
pub mod lstd;
pub mod mc;
pub mod mis;
pub mod ridge;
pub mod stats;

pub use fitted::{fqe, fqi};
pub use lspi::{lspi, LspiFit};
pub use lstd::{lstd_eval, LstdFit};
pub use mc::mc_fold_value;
pub use mis::{mis_ratio, mis_value, mis_weighted_rewards, RatioFunction};
pub use ridge::RidgeProblem;
pub use stats::PairStats;

use crate::error::{Error, Result};
use crate::features::FeatureMap;

pub const DEFAULT_RIDGE: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Penalty on ‖θ‖² added to the summed squared loss.
    pub ridge_lambda: f64,
    pub n_iterations: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            ridge_lambda: DEFAULT_RIDGE,
            n_iterations: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ridge_lambda must be >= 0, got {}",
                self.ridge_lambda
            )));
        }
        if self.n_iterations == 0 {
            return Err(Error::InvalidParameter("n_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_map(map: &FeatureMap, n_states: usize, n_actions: usize) -> Result<()> {
    if map.n_states() != n_states || map.n_actions() != n_actions {
        return Err(Error::InvalidParameter(format!(
            "feature map covers {}x{}, data lives on {}x{}",
            map.n_states(),
            map.n_actions(),
            n_states,
            n_actions
        )));
    }
    Ok(())
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::dataset::{collect_exhaustive, OfflineDataset};
    use crate::env::TabularMdp;
    use crate::noise::NoiseSpec;

    pub fn exhaustive(mdp: &TabularMdp, per_pair: usize, seed: u64) -> OfflineDataset {
        collect_exhaustive(mdp, per_pair, &NoiseSpec::none(), seed).unwrap()
    }

    /// One state, one self-loop per arm.
    pub fn bandit(rewards: &[f64], gamma: f64) -> TabularMdp {
        let n = rewards.len();
        TabularMdp::from_flat(1, n, vec![1.0; n], rewards.to_vec(), vec![1.0], gamma).unwrap()
    }

    pub fn exact_cfg() -> super::FitConfig {
        super::FitConfig {
            ridge_lambda: 0.0,
            ..Default::default()
        }
    }
}
