//! Scalar simulation: median-of-means versus the sample mean on centered
//! heavy-tailed draws.

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::rng::derive_seed;
use crate::robust::mm::mm_mean;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmCheckConfig {
    pub df: f64,
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for MmCheckConfig {
    fn default() -> Self {
        MmCheckConfig {
            df: 2.0,
            n: 1024,
            k: 8,
            replicates: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmCheckReport {
    pub rmse_sample_mean: f64,
    pub rmse_mm: f64,
}

impl MmCheckReport {
    /// RMSE(sample mean) / RMSE(median of means).
    pub fn ratio(&self) -> f64 {
        self.rmse_sample_mean / self.rmse_mm
    }
}

/// Both estimators see the same `n` draws of a standard t_df variable in
/// every replicate; the true mean is 0.
pub fn mm_check(cfg: &MmCheckConfig) -> Result<MmCheckReport> {
    if cfg.replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be at least 1".into()));
    }
    let noise = NoiseSpec::new(cfg.df, 1.0)?;
    let (mut se_mean, mut se_mm) = (0.0, 0.0);
    for r in 0..cfg.replicates {
        let draws = noise.sample(cfg.n, derive_seed(cfg.seed, r as u64));
        let mean = draws.iter().sum::<f64>() / cfg.n as f64;
        let mm = mm_mean(&draws, cfg.k)?;
        se_mean += mean * mean;
        se_mm += mm * mm;
    }
    let reps = cfg.replicates as f64;
    Ok(MmCheckReport {
        rmse_sample_mean: (se_mean / reps).sqrt(),
        rmse_mm: (se_mm / reps).sqrt(),
    })
}
