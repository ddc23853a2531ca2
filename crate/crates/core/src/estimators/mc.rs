use crate::dataset::Transition;
use crate::error::{Error, Result};

/// Mean discounted return Σ_t γ^t R_t over the trajectories of a fold. The
/// fold must hold on-policy trajectories for the estimate to be unbiased.
/// Consecutive tuples sharing a trajectory id form one trajectory; the
/// `step` field gives the discount exponent.
pub fn mc_fold_value(fold: &[Transition], gamma: f64) -> Result<f64> {
    if fold.is_empty() {
        return Err(Error::Empty("fold has no trajectories"));
    }
    let mut total = 0.0;
    let mut n_traj = 0usize;
    let mut current = None;
    for t in fold {
        if current != Some(t.trajectory_id) {
            current = Some(t.trajectory_id);
            n_traj += 1;
        }
        total += gamma.powi(t.step as i32) * t.reward;
    }
    Ok(total / n_traj as f64)
}
