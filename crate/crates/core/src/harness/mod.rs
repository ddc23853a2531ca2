//! Configuration-driven experiment runner.

pub mod config;
pub mod experiment;
pub mod mm_check;
pub mod summary;

pub use config::{EnvSpec, ExperimentConfig, FeatureChoice, Task};
pub use experiment::{
    run_experiment, run_ope_experiment, run_opo_experiment, write_csv, ResultRecord, CSV_HEADER, OPE_METHODS,
    OPO_METHODS, THREADS_ENV,
};
pub use mm_check::{mm_check, MmCheckConfig, MmCheckReport};
pub use summary::{read_csv, summarize, write_summary, SummaryRow};
