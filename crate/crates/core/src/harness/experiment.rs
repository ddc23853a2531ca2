//! Seeded OPE and OPO sweeps. Replicate r uses seed `base_seed + r`; every
//! method and every (df, κ) cell of a replicate consumes data generated
//! from that seed, so comparisons are paired.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{collect, OfflineDataset};
use crate::env::{exact_value, optimal_policy, integrate, MdpShape, Policy, TabularMdp};
use crate::error::{Error, Result};
use crate::estimators::{fqe, fqi, lspi, lstd_eval, mis_ratio, mis_value, FitConfig};
use crate::features::FeatureMap;
use crate::harness::config::{DmBaseChoice, ExperimentConfig, Task, VmBaseChoice};
use crate::noise::NoiseSpec;
use crate::opo::{greedy_policy, pb_baseline, regret_against, room_fqi, room_vm, OpoBase};
use crate::rng::derive_seed;
use crate::robust::aggregate::AggRule;
use crate::robust::ope::{roam_dm, roam_fqe, roam_mis, roam_variant, tm_mis, DmBase, EnsembleSpec};

pub const CSV_HEADER: &str =
    "replicate,method,env,df,kappa,K,q,seed,estimate_or_regret,truth,squared_error,wall_time_ms";

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "ROBUST_ORL_THREADS";

const FOLD_STREAM: u64 = 3;

pub const OPE_METHODS: [&str; 11] = [
    "FQE",
    "MIS",
    "TM-MIS",
    "MA-DM",
    "MA-MIS",
    "ROAM-DM",
    "ROAM-Variant",
    "ROAM-MIS",
    "ROAM-FQE",
    "B-ROAM-DM",
    "B-ROAM-MIS",
];

pub const OPO_METHODS: [&str; 7] = ["FQI", "PB", "MA-VM", "ROOM-VM", "P-ROOM-VM", "ROOM-FQI", "P-ROOM-FQI"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub replicate: usize,
    pub method: String,
    pub env: String,
    pub df: f64,
    pub kappa: f64,
    pub k: usize,
    pub q: f64,
    pub seed: u64,
    /// Value estimate for OPE, regret for OPO.
    pub value: f64,
    /// J^π for OPE, J^{π*} for OPO.
    pub truth: f64,
    /// (estimate − truth)² for OPE, regret² for OPO.
    pub squared_error: f64,
    pub wall_time_ms: f64,
    /// Fingerprint of the dataset the row was computed from; not written
    /// to CSV.
    pub dataset_fingerprint: u64,
}

impl ResultRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.replicate,
            self.method,
            self.env,
            self.df,
            self.kappa,
            self.k,
            self.q,
            self.seed,
            self.value,
            self.truth,
            self.squared_error,
            self.wall_time_ms
        )
    }
}

pub fn write_csv<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Which grid axes change a method's output. Methods that ignore an axis
/// are computed once per dataset and their value is repeated across it.
fn uses_axes(method: &str) -> (bool, bool) {
    match method {
        "FQE" | "MIS" | "TM-MIS" | "FQI" => (false, false),
        "P-ROOM-VM" | "P-ROOM-FQI" => (true, true),
        _ => (true, false),
    }
}

fn check_methods(cfg: &ExperimentConfig) -> Result<()> {
    let known: &[&str] = match cfg.task {
        Task::Ope => &OPE_METHODS,
        Task::Opo => &OPO_METHODS,
    };
    if let Some(m) = cfg.methods.iter().find(|m| !known.contains(&m.as_str())) {
        return Err(Error::Config(format!("unknown method `{m}` for this task; expected one of {known:?}")));
    }
    Ok(())
}

struct Setup {
    mdp: TabularMdp,
    map: FeatureMap,
    target: Policy,
    behavior: Policy,
    truth: f64,
    fit: FitConfig,
    env_label: String,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    check_methods(cfg)?;
    let mdp = cfg.env.build(cfg.gamma)?;
    let map = cfg.features.build(&cfg.env, mdp.n_actions())?;
    let (target, _) = optimal_policy(&mdp);
    let behavior = Policy::epsilon_greedy(target.clone(), cfg.epsilon)?;
    let truth = exact_value(&mdp, &target)?;
    Ok(Setup {
        mdp,
        map,
        target,
        behavior,
        truth,
        fit: FitConfig {
            ridge_lambda: cfg.ridge,
            n_iterations: cfg.iterations,
            seed: cfg.base_seed,
        },
        env_label: cfg.env.to_string(),
    })
}

fn with_pool<T: Send>(job: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        _ => Ok(job()),
    }
}

/// Runs the sweep, replicates in parallel; output order is fixed by
/// (replicate, method, df, κ, K, q) regardless of scheduling.
fn run(
    cfg: &ExperimentConfig,
    setup: &Setup,
    eval: impl Fn(&str, &OfflineDataset, usize, f64, u64) -> Result<f64> + Sync,
    score: impl Fn(f64) -> (f64, f64) + Sync,
) -> Result<Vec<ResultRecord>> {
    let per_replicate = |r: usize| -> Result<Vec<ResultRecord>> {
        let seed = cfg.base_seed.wrapping_add(r as u64);
        let fold_seed = derive_seed(seed, FOLD_STREAM);
        let mut cells = Vec::new();
        for &df in &cfg.df {
            for &kappa in &cfg.kappa {
                let noise = NoiseSpec::new(df, kappa)?.with_scale_exponent(cfg.scale_exponent);
                let data = collect(&setup.mdp, &setup.behavior, cfg.n_episodes, cfg.horizon, &noise, seed)?;
                cells.push((df, kappa, data));
            }
        }
        let mut rows = Vec::new();
        for method in &cfg.methods {
            let (use_k, use_q) = uses_axes(method);
            for (df, kappa, data) in &cells {
                let mut memo: HashMap<(usize, u64), (f64, f64)> = HashMap::new();
                for &k in &cfg.k {
                    for &q in &cfg.q {
                        let key = (if use_k { k } else { 0 }, if use_q { q.to_bits() } else { 0 });
                        let (value, ms) = match memo.get(&key) {
                            Some(&hit) => hit,
                            None => {
                                let start = Instant::now();
                                let v = eval(method, data, k, q, fold_seed)?;
                                let ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                                memo.insert(key, (v, ms));
                                (v, ms)
                            }
                        };
                        let (truth, sq) = score(value);
                        rows.push(ResultRecord {
                            replicate: r,
                            method: method.clone(),
                            env: setup.env_label.clone(),
                            df: *df,
                            kappa: *kappa,
                            k,
                            q,
                            seed,
                            value,
                            truth,
                            squared_error: sq,
                            wall_time_ms: ms,
                            dataset_fingerprint: data.fingerprint(),
                        });
                    }
                }
            }
        }
        Ok(rows)
    };
    let batches = with_pool(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(per_replicate)
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(batches.into_iter().flatten().collect())
}

/// Off-policy evaluation of the optimal policy from ε-greedy data.
pub fn run_ope_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    if cfg.task != Task::Ope {
        return Err(Error::Config("run_ope_experiment needs task = ope".into()));
    }
    let s = setup(cfg)?;
    let shape: MdpShape = s.mdp.shape();
    let gamma = cfg.gamma;
    let dm_base = match cfg.dm_base {
        DmBaseChoice::Fqe => DmBase::Fqe,
        DmBaseChoice::Lstd => DmBase::Lstd,
    };
    let g = shape.initial_dist.clone();
    let eval = |method: &str, data: &OfflineDataset, k: usize, _q: f64, fold_seed: u64| -> Result<f64> {
        let median = EnsembleSpec::new(k, AggRule::Median, fold_seed);
        let mean = EnsembleSpec::new(k, AggRule::Mean, fold_seed);
        let (pi, map, fit) = (&s.target, &s.map, &s.fit);
        match method {
            "FQE" => {
                let q = match dm_base {
                    DmBase::Fqe => fqe(data.tuples(), pi, map, gamma, fit)?,
                    DmBase::Lstd => lstd_eval(data.tuples(), pi, map, gamma, fit)?.q,
                };
                Ok(integrate(&q.table(), &pi.to_tabular(), &g))
            }
            "MIS" => {
                let ratio = mis_ratio(data.tuples(), pi, &shape, gamma, None)?;
                mis_value(data.tuples(), &ratio, gamma)
            }
            "TM-MIS" => tm_mis(data, pi, &shape, gamma, None, cfg.trim),
            "MA-DM" => roam_dm(data, pi, map, &g, gamma, fit, dm_base, &mean),
            "MA-MIS" => roam_mis(data, pi, &shape, gamma, None, &mean),
            "ROAM-DM" => roam_dm(data, pi, map, &g, gamma, fit, dm_base, &median),
            "ROAM-Variant" => roam_variant(data, pi, map, &g, gamma, fit, dm_base, &median),
            "ROAM-MIS" => roam_mis(data, pi, &shape, gamma, None, &median),
            "ROAM-FQE" => roam_fqe(data, pi, map, &g, gamma, fit, &median),
            "B-ROAM-DM" => roam_dm(data, pi, map, &g, gamma, fit, dm_base, &median.bootstrap()),
            "B-ROAM-MIS" => roam_mis(data, pi, &shape, gamma, None, &median.bootstrap()),
            other => Err(Error::Config(format!("unknown OPE method `{other}`"))),
        }
    };
    let truth = s.truth;
    run(cfg, &s, eval, |v| (truth, (v - truth).powi(2)))
}

/// Offline policy optimization from ε-greedy data; rows carry regret.
pub fn run_opo_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    if cfg.task != Task::Opo {
        return Err(Error::Config("run_opo_experiment needs task = opo".into()));
    }
    let s = setup(cfg)?;
    let gamma = cfg.gamma;
    let base = match cfg.vm_base {
        VmBaseChoice::Fqi => OpoBase::Fqi,
        VmBaseChoice::Lspi => OpoBase::Lspi,
    };
    let optimum = s.truth;
    let eval = |method: &str, data: &OfflineDataset, k: usize, q: f64, fold_seed: u64| -> Result<f64> {
        let (map, fit) = (&s.map, &s.fit);
        let spec = |rule| EnsembleSpec::new(k, rule, fold_seed);
        let learned = match method {
            "FQI" => match base {
                OpoBase::Fqi => greedy_policy(&fqi(data.tuples(), map, gamma, fit)?, "fqi"),
                OpoBase::Lspi => greedy_policy(&lspi(data.tuples(), map, gamma, fit)?.q, "lspi"),
            },
            "PB" => pb_baseline(data, map, gamma, fit, k, fold_seed)?,
            "MA-VM" => room_vm(data, map, gamma, fit, base, &spec(AggRule::Mean))?,
            "ROOM-VM" => room_vm(data, map, gamma, fit, base, &spec(AggRule::Median))?,
            "P-ROOM-VM" => room_vm(data, map, gamma, fit, base, &spec(AggRule::quantile(q)?))?,
            "ROOM-FQI" => room_fqi(data, map, gamma, fit, &spec(AggRule::Median))?,
            "P-ROOM-FQI" => room_fqi(data, map, gamma, fit, &spec(AggRule::quantile(q)?))?,
            other => return Err(Error::Config(format!("unknown OPO method `{other}`"))),
        };
        regret_against(&s.mdp, optimum, &learned)
    };
    run(cfg, &s, eval, |v| (optimum, v * v))
}

/// Dispatches on the configured task.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    match cfg.task {
        Task::Ope => run_ope_experiment(cfg),
        Task::Opo => run_opo_experiment(cfg),
    }
}
