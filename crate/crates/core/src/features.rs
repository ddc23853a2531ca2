//! Feature maps φ(s, a) for linear Q-function approximation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    /// Indicator of the flat pair index `s * n_actions + a`.
    OneHot,
    /// Bias, main effects and all degree-2 products of the concatenated
    /// `(state_embedding[s], action_embedding[a])` vector.
    Polynomial2 {
        state_embedding: Vec<Vec<f64>>,
        action_embedding: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    kind: FeatureKind,
}

impl FeatureMap {
    pub fn one_hot(n_states: usize, n_actions: usize) -> Self {
        FeatureMap {
            n_states,
            n_actions,
            dim: n_states * n_actions,
            kind: FeatureKind::OneHot,
        }
    }

    pub fn polynomial2(
        state_embedding: Vec<Vec<f64>>,
        action_embedding: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if state_embedding.is_empty() || action_embedding.is_empty() {
            return Err(Error::Empty("feature embeddings"));
        }
        let ds = state_embedding[0].len();
        let da = action_embedding[0].len();
        if state_embedding.iter().any(|e| e.len() != ds)
            || action_embedding.iter().any(|e| e.len() != da)
        {
            return Err(Error::InvalidParameter(
                "embeddings must have a common length".into(),
            ));
        }
        if state_embedding.iter().chain(&action_embedding).flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("embeddings must be finite".into()));
        }
        let m = ds + da;
        Ok(FeatureMap {
            n_states: state_embedding.len(),
            n_actions: action_embedding.len(),
            dim: 1 + m + m * (m + 1) / 2,
            kind: FeatureKind::Polynomial2 {
                state_embedding,
                action_embedding,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    pub fn featurize(&self, s: usize, a: usize) -> Result<Vec<f64>> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::OutOfDomain {
                state: s,
                action: a,
                n_states: self.n_states,
                n_actions: self.n_actions,
            });
        }
        let mut out = vec![0.0; self.dim];
        self.write_features(s, a, &mut out);
        Ok(out)
    }

    /// Writes φ(s, a) into `out`. Indices must already be in range.
    pub(crate) fn write_features(&self, s: usize, a: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            FeatureKind::OneHot => {
                out.fill(0.0);
                out[s * self.n_actions + a] = 1.0;
            }
            FeatureKind::Polynomial2 {
                state_embedding,
                action_embedding,
            } => {
                let z: Vec<f64> = state_embedding[s]
                    .iter()
                    .chain(&action_embedding[a])
                    .copied()
                    .collect();
                let m = z.len();
                out[0] = 1.0;
                out[1..=m].copy_from_slice(&z);
                let mut idx = m + 1;
                for i in 0..m {
                    for j in i..m {
                        out[idx] = z[i] * z[j];
                        idx += 1;
                    }
                }
            }
        }
    }

    /// Feature vectors for every pair, row `s * n_actions + a`.
    pub fn feature_table(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(self.n_states * self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let mut v = vec![0.0; self.dim];
                self.write_features(s, a, &mut v);
                rows.push(v);
            }
        }
        rows
    }

    /// sup over (s, a) and coordinates of |φ(s, a)|.
    pub fn sup_norm(&self) -> f64 {
        self.feature_table()
            .iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}
