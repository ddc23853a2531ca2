use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// A state-action value table, row-major over `s * n_actions + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::InvalidParameter(format!(
                "Q table needs {} entries, got {}",
                n_states * n_actions,
                values.len()
            )));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// First index of the maximum; ties go to the lowest action.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum QFunction {
    Tabular(QTable),
    Linear { theta: Vec<f64>, map: FeatureMap },
}

impl QFunction {
    pub fn linear(theta: Vec<f64>, map: FeatureMap) -> Result<Self> {
        if theta.len() != map.dim() {
            return Err(Error::InvalidParameter(format!(
                "theta has length {}, feature map has dimension {}",
                theta.len(),
                map.dim()
            )));
        }
        Ok(QFunction::Linear { theta, map })
    }

    pub fn n_states(&self) -> usize {
        match self {
            QFunction::Tabular(t) => t.n_states(),
            QFunction::Linear { map, .. } => map.n_states(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            QFunction::Tabular(t) => t.n_actions(),
            QFunction::Linear { map, .. } => map.n_actions(),
        }
    }

    pub fn value(&self, s: usize, a: usize) -> f64 {
        match self {
            QFunction::Tabular(t) => t.get(s, a),
            QFunction::Linear { theta, map } => {
                let mut phi = vec![0.0; map.dim()];
                map.write_features(s, a, &mut phi);
                dot(&phi, theta)
            }
        }
    }

    /// Evaluates the function on every pair.
    pub fn table(&self) -> QTable {
        match self {
            QFunction::Tabular(t) => t.clone(),
            QFunction::Linear { theta, map } => {
                let values = map.feature_table().iter().map(|phi| dot(phi, theta)).collect();
                QTable {
                    n_states: map.n_states(),
                    n_actions: map.n_actions(),
                    values,
                }
            }
        }
    }

    pub fn greedy_actions(&self) -> Vec<usize> {
        let t = self.table();
        (0..t.n_states()).map(|s| argmax_lowest(t.row(s))).collect()
    }

    pub fn theta(&self) -> Option<&[f64]> {
        match self {
            QFunction::Linear { theta, .. } => Some(theta),
            QFunction::Tabular(_) => None,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_one_hot_round_trips_to_table() {
        let map = FeatureMap::one_hot(3, 2);
        let theta = vec![0.5, -1.0, 2.0, 3.5, 0.0, 7.25];
        let q = QFunction::linear(theta.clone(), map).unwrap();
        assert_eq!(q.table().values(), theta.as_slice());
        assert_eq!(q.value(1, 1), 3.5);
    }

    #[test]
    fn ties_break_to_lowest_action() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_lowest(&[0.0, 0.0]), 0);
    }

    #[test]
    fn theta_length_checked() {
        assert!(QFunction::linear(vec![0.0; 3], FeatureMap::one_hot(2, 2)).is_err());
    }
}
