//! Robust aggregation across data folds for evaluation.

pub mod aggregate;
pub mod mm;
pub mod ope;

pub use aggregate::{aggregate, quantile_rank, value_lower_bound, AggRule};
pub use mm::{k_for_delta, mm_mean};
pub use ope::{
    dm_ensemble, fold_views, mis_fold_values, roam_dm, roam_fqe, roam_fqe_ensemble, roam_mis, roam_variant,
    tm_mis, DmBase, EnsembleQ, EnsembleSpec, FoldScheme,
};
