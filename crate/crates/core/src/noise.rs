//! Heavy-tailed reward noise: κ · t_df / σ^e, with σ the standard deviation
//! of a Student-t after trimming `trunc_mass` of probability (split evenly
//! between the tails).
//!
//! Draws use inverse-CDF sampling from a single uniform per draw, so two
//! specs that differ only in `df` or `kappa` produce quantile-coupled noise
//! under the same seed.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng::{open_unit, rng_from_seed};

pub const DEFAULT_TRUNC_MASS: f64 = 0.02;
pub const DEFAULT_CALIBRATION_N: usize = 1_000_000;
pub const DEFAULT_CALIBRATION_SEED: u64 = 0x5EED_CA11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScaleExponent {
    /// Divide by σ (standardize).
    One,
    /// Divide by σ².
    Two,
}

impl ScaleExponent {
    pub fn power(self) -> i32 {
        match self {
            ScaleExponent::One => 1,
            ScaleExponent::Two => 2,
        }
    }

    pub fn from_power(p: u32) -> Result<Self> {
        match p {
            1 => Ok(ScaleExponent::One),
            2 => Ok(ScaleExponent::Two),
            _ => Err(Error::InvalidParameter(format!("scale exponent must be 1 or 2, got {p}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    df: f64,
    kappa: f64,
    trunc_mass: f64,
    scale_exponent: ScaleExponent,
    calibration_n: usize,
    calibration_seed: u64,
    sigma: OnceLock<f64>,
}

impl PartialEq for NoiseSpec {
    fn eq(&self, other: &Self) -> bool {
        self.df == other.df
            && self.kappa == other.kappa
            && self.trunc_mass == other.trunc_mass
            && self.scale_exponent == other.scale_exponent
            && self.calibration_n == other.calibration_n
            && self.calibration_seed == other.calibration_seed
    }
}

impl NoiseSpec {
    pub fn new(df: f64, kappa: f64) -> Result<Self> {
        if !(df > 1.0) {
            return Err(Error::InvalidParameter(format!("df must exceed 1, got {df}")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(NoiseSpec {
            df,
            kappa,
            trunc_mass: DEFAULT_TRUNC_MASS,
            scale_exponent: ScaleExponent::One,
            calibration_n: DEFAULT_CALIBRATION_N,
            calibration_seed: DEFAULT_CALIBRATION_SEED,
            sigma: OnceLock::new(),
        })
    }

    /// No noise at all.
    pub fn none() -> Self {
        Self::new(2.0, 0.0).expect("valid")
    }

    pub fn with_trunc_mass(mut self, trunc_mass: f64) -> Result<Self> {
        if !(trunc_mass > 0.0 && trunc_mass < 1.0) {
            return Err(Error::InvalidParameter(format!("trunc_mass must lie in (0, 1), got {trunc_mass}")));
        }
        self.trunc_mass = trunc_mass;
        self.sigma = OnceLock::new();
        Ok(self)
    }

    pub fn with_scale_exponent(mut self, e: ScaleExponent) -> Self {
        self.scale_exponent = e;
        self
    }

    pub fn with_calibration(mut self, n: usize, seed: u64) -> Result<Self> {
        if n < 10 {
            return Err(Error::InvalidParameter("calibration_n must be at least 10".into()));
        }
        self.calibration_n = n;
        self.calibration_seed = seed;
        self.sigma = OnceLock::new();
        Ok(self)
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn trunc_mass(&self) -> f64 {
        self.trunc_mass
    }

    pub fn scale_exponent(&self) -> ScaleExponent {
        self.scale_exponent
    }

    pub fn calibration_n(&self) -> usize {
        self.calibration_n
    }

    pub fn calibration_seed(&self) -> u64 {
        self.calibration_seed
    }

    /// σ under this configuration's calibration seed, memoized.
    pub fn sigma(&self) -> f64 {
        *self.sigma.get_or_init(|| cached_sigma(self))
    }

    /// Deterministic `n` draws of κ · t_df / σ^e.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        if self.kappa == 0.0 {
            return vec![0.0; n];
        }
        let divisor = self.sigma().powi(self.scale_exponent.power());
        let t = student_t(self.df);
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| self.kappa * (t.inverse_cdf(open_unit(&mut rng)) / divisor))
            .collect()
    }
}

fn student_t(df: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, df).expect("df > 1 checked at construction")
}

type SigmaKey = (u64, u64, usize, u64);

fn cached_sigma(spec: &NoiseSpec) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<SigmaKey, f64>>> = OnceLock::new();
    let key = (
        spec.df.to_bits(),
        spec.trunc_mass.to_bits(),
        spec.calibration_n,
        spec.calibration_seed,
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&s) = cache.lock().expect("sigma cache poisoned").get(&key) {
        return s;
    }
    let sigma = calibrate_sigma(spec, spec.calibration_seed);
    cache.lock().expect("sigma cache poisoned").insert(key, sigma);
    sigma
}

/// Standard deviation of `calibration_n` t_df draws after discarding those
/// below the `trunc_mass / 2` and above the `1 − trunc_mass / 2` empirical
/// quantiles.
pub fn calibrate_sigma(spec: &NoiseSpec, seed: u64) -> f64 {
    let t = student_t(spec.df);
    let mut rng = rng_from_seed(seed);
    let mut draws: Vec<f64> = (0..spec.calibration_n)
        .map(|_| t.inverse_cdf(open_unit(&mut rng)))
        .collect();
    draws.sort_by(f64::total_cmp);
    let n = draws.len();
    let cut = ((spec.trunc_mass / 2.0) * n as f64).floor() as usize;
    let kept = &draws[cut..n - cut];
    let m = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / m;
    let var = kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    var.sqrt()
}

pub fn sample_noise(spec: &NoiseSpec, n: usize, seed: u64) -> Vec<f64> {
    spec.sample(n, seed)
}

/// Empirical E|X|^p, the diagnostic behind the (1+α)-moment of the reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub p: f64,
    pub empirical_moment: f64,
    pub sample_size: usize,
}

impl MomentReport {
    /// (E|X|^p)^(1/p).
    pub fn norm(&self) -> f64 {
        self.empirical_moment.powf(1.0 / self.p)
    }
}

pub fn empirical_moment(samples: &[f64], p: f64) -> Result<MomentReport> {
    if samples.is_empty() {
        return Err(Error::Empty("moment samples"));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("moment order must be positive, got {p}")));
    }
    let m = samples.iter().map(|x| x.abs().powf(p)).sum::<f64>() / samples.len() as f64;
    Ok(MomentReport {
        p,
        empirical_moment: m,
        sample_size: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(df: f64, kappa: f64) -> NoiseSpec {
        NoiseSpec::new(df, kappa).unwrap().with_calibration(50_000, 1).unwrap()
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(NoiseSpec::new(1.0, 1.0).is_err());
        assert!(NoiseSpec::new(3.0, -1.0).is_err());
        assert!(NoiseSpec::new(3.0, 1.0).unwrap().with_trunc_mass(1.0).is_err());
        assert!(ScaleExponent::from_power(3).is_err());
    }

    #[test]
    fn zero_kappa_is_silent() {
        assert!(small(2.0, 0.0).sample(100, 4).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn kappa_scales_elementwise() {
        let one = small(3.0, 1.0).sample(1000, 7);
        let two = small(3.0, 2.0).sample(1000, 7);
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn sigma_deterministic_per_seed() {
        let spec = small(3.0, 1.0);
        assert_eq!(calibrate_sigma(&spec, 5), calibrate_sigma(&spec, 5));
        assert!(calibrate_sigma(&spec, 5) > 0.0);
    }

    #[test]
    fn scale_exponent_two_divides_again() {
        let a = small(4.0, 1.0);
        let b = small(4.0, 1.0).with_scale_exponent(ScaleExponent::Two);
        let s = a.sigma();
        for (x, y) in a.sample(50, 2).iter().zip(b.sample(50, 2)) {
            assert!((x / s - y).abs() < 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn moment_examples() {
        let r = empirical_moment(&[-2.0, 2.0], 2.0).unwrap();
        assert_eq!(r.empirical_moment, 4.0);
        assert_eq!(empirical_moment(&[0.0; 5], 1.5).unwrap().empirical_moment, 0.0);
        assert!(empirical_moment(&[], 2.0).is_err());
        assert!(empirical_moment(&[1.0], 0.0).is_err());
    }

    #[test]
    fn near_normal_sigma_matches_truncated_normal() {
        use statrs::distribution::{Continuous, ContinuousCDF, Normal};
        let z = Normal::standard();
        let cut = z.inverse_cdf(1.0 - DEFAULT_TRUNC_MASS / 2.0);
        let closed = (1.0 - 2.0 * cut * z.pdf(cut) / (1.0 - DEFAULT_TRUNC_MASS)).sqrt();
        let sigma = NoiseSpec::new(1e6, 1.0).unwrap().sigma();
        assert!((sigma / closed - 1.0).abs() < 0.02, "sigma {sigma} vs closed form {closed}");
    }

    #[test]
    fn heavier_tails_widen_truncated_sigma() {
        assert!(NoiseSpec::new(3.0, 1.0).unwrap().sigma() > NoiseSpec::new(30.0, 1.0).unwrap().sigma());
    }
}
