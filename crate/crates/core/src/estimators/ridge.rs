use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::estimators::stats::PairStats;
use crate::features::FeatureMap;

/// Ridge regression of per-tuple targets on φ(S, A), minimizing
/// Σ (Y − φᵀθ)² + λ‖θ‖². The Gram matrix is factored once, so repeated
/// fits with new targets (fitted-Q iterations) only redo the right-hand side.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    features: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl RidgeProblem {
    pub fn new(stats: &PairStats, map: &FeatureMap, ridge_lambda: f64) -> Result<Self> {
        let features = feature_matrix(map);
        let dim = map.dim();
        let mut gram = DMatrix::<f64>::identity(dim, dim) * ridge_lambda;
        for (p, &c) in stats.count.iter().enumerate() {
            if c > 0.0 {
                let phi = features.row(p);
                gram += c * phi.transpose() * phi;
            }
        }
        let factor = gram
            .cholesky()
            .ok_or_else(|| Error::Singular("ridge Gram matrix is not positive definite".into()))?;
        Ok(RidgeProblem { features, factor })
    }

    /// θ for the targets whose per-pair sums are `target_sums`.
    pub fn solve(&self, target_sums: &[f64]) -> Vec<f64> {
        let rhs = self.features.tr_mul(&DVector::from_column_slice(target_sums));
        self.factor.solve(&rhs).as_slice().to_vec()
    }

    /// Q values of θ on every pair.
    pub fn evaluate(&self, theta: &[f64]) -> Vec<f64> {
        (&self.features * DVector::from_column_slice(theta)).as_slice().to_vec()
    }
}

/// Rows are φ(s, a) for pair `s * n_actions + a`.
pub(crate) fn feature_matrix(map: &FeatureMap) -> DMatrix<f64> {
    let rows = map.feature_table();
    DMatrix::from_fn(rows.len(), map.dim(), |i, j| rows[i][j])
}
