//! Flat `key = value` experiment configuration. Lists are comma-separated,
//! `#` starts a comment, and unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::env::TabularMdp;
use crate::error::{Error, Result};
use crate::estimators::{DEFAULT_ITERATIONS, DEFAULT_RIDGE};
use crate::features::FeatureMap;
use crate::noise::ScaleExponent;
use crate::robust::aggregate::{DEFAULT_Q, DEFAULT_TRIM};

pub const DEFAULT_SLIP: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_EPISODES: usize = 100;
pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_K: usize = 5;

/// Built-in environment, written `chain:N[:slip]`, `grid:SIDE[:goal[:cost[:slip]]]`
/// or `random:S:A[:seed]`.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Chain { n_states: usize, slip: f64 },
    Grid { side: usize, goal_reward: f64, step_cost: f64, slip: f64 },
    Random { n_states: usize, n_actions: usize, seed: u64 },
}

impl EnvSpec {
    pub fn build(&self, gamma: f64) -> Result<TabularMdp> {
        match *self {
            EnvSpec::Chain { n_states, slip } => TabularMdp::chain(n_states, slip, gamma),
            EnvSpec::Grid {
                side,
                goal_reward,
                step_cost,
                slip,
            } => TabularMdp::grid(side, goal_reward, step_cost, slip, gamma),
            EnvSpec::Random {
                n_states,
                n_actions,
                seed,
            } => TabularMdp::random(n_states, n_actions, gamma, seed),
        }
    }

    /// Low-dimensional state embedding for polynomial features: position
    /// on the chain, (row, column) on the grid, scaled to [0, 1].
    fn state_embedding(&self) -> Vec<Vec<f64>> {
        let scale = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        match *self {
            EnvSpec::Chain { n_states, .. } => (0..n_states).map(|s| vec![scale(s, n_states)]).collect(),
            EnvSpec::Grid { side, .. } => (0..side * side)
                .map(|s| vec![scale(s / side, side), scale(s % side, side)])
                .collect(),
            EnvSpec::Random { n_states, .. } => (0..n_states).map(|s| vec![scale(s, n_states)]).collect(),
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::Chain { n_states, slip } => write!(f, "chain:{n_states}:{slip}"),
            EnvSpec::Grid {
                side,
                goal_reward,
                step_cost,
                slip,
            } => write!(f, "grid:{side}:{goal_reward}:{step_cost}:{slip}"),
            EnvSpec::Random {
                n_states,
                n_actions,
                seed,
            } => write!(f, "random:{n_states}:{n_actions}:{seed}"),
        }
    }
}

impl FromStr for EnvSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let bad = || Error::Config(format!("cannot parse environment `{s}`"));
        let num = |i: usize| -> Result<f64> { parts[i].parse().map_err(|_| bad()) };
        let int = |i: usize| -> Result<usize> { parts[i].parse().map_err(|_| bad()) };
        match (parts[0], parts.len()) {
            ("chain", 2..=3) => Ok(EnvSpec::Chain {
                n_states: int(1)?,
                slip: if parts.len() > 2 { num(2)? } else { DEFAULT_SLIP },
            }),
            ("grid", 2..=5) => Ok(EnvSpec::Grid {
                side: int(1)?,
                goal_reward: if parts.len() > 2 { num(2)? } else { 1.0 },
                step_cost: if parts.len() > 3 { num(3)? } else { 0.0 },
                slip: if parts.len() > 4 { num(4)? } else { DEFAULT_SLIP },
            }),
            ("random", 3..=4) => Ok(EnvSpec::Random {
                n_states: int(1)?,
                n_actions: int(2)?,
                seed: if parts.len() > 3 { parts[3].parse().map_err(|_| bad())? } else { 0 },
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Ope,
    Opo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureChoice {
    OneHot,
    /// Degree-2 polynomial of the state embedding and a one-hot action code.
    Poly,
}

impl FeatureChoice {
    pub fn build(&self, env: &EnvSpec, n_actions: usize) -> Result<FeatureMap> {
        match self {
            FeatureChoice::OneHot => {
                let states = env.state_embedding().len();
                Ok(FeatureMap::one_hot(states, n_actions))
            }
            FeatureChoice::Poly => {
                let actions = (0..n_actions)
                    .map(|a| (0..n_actions).map(|b| f64::from(u8::from(a == b))).collect())
                    .collect();
                FeatureMap::polynomial2(env.state_embedding(), actions)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmBaseChoice {
    Fqe,
    Lstd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmBaseChoice {
    Fqi,
    Lspi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub task: Task,
    pub methods: Vec<String>,
    pub df: Vec<f64>,
    pub kappa: Vec<f64>,
    pub k: Vec<usize>,
    pub q: Vec<f64>,
    pub n_episodes: usize,
    pub horizon: usize,
    pub replicates: usize,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    pub gamma: f64,
    pub epsilon: f64,
    pub features: FeatureChoice,
    pub ridge: f64,
    pub iterations: usize,
    pub scale_exponent: ScaleExponent,
    pub trim: f64,
    pub dm_base: DmBaseChoice,
    pub vm_base: VmBaseChoice,
    /// Record wall-clock time per row. Off by default so reruns produce
    /// byte-identical CSV files.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn defaults(task: Task) -> Self {
        let methods = match task {
            Task::Ope => ["FQE", "ROAM-DM", "ROAM-FQE"],
            Task::Opo => ["FQI", "ROOM-VM", "P-ROOM-VM"],
        };
        ExperimentConfig {
            env: EnvSpec::Chain {
                n_states: 5,
                slip: DEFAULT_SLIP,
            },
            task,
            methods: methods.iter().map(|m| m.to_string()).collect(),
            df: vec![2.0, 3.0, 5.0, 30.0],
            kappa: vec![1.0, 2.0],
            k: vec![DEFAULT_K],
            q: vec![DEFAULT_Q],
            n_episodes: DEFAULT_EPISODES,
            horizon: DEFAULT_HORIZON,
            replicates: DEFAULT_REPLICATES,
            base_seed: 0,
            output: None,
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
            features: FeatureChoice::OneHot,
            ridge: DEFAULT_RIDGE,
            iterations: DEFAULT_ITERATIONS,
            scale_exponent: ScaleExponent::One,
            trim: DEFAULT_TRIM,
            dm_base: DmBaseChoice::Fqe,
            vm_base: VmBaseChoice::Fqi,
            timing: false,
        }
    }

    pub fn parse(text: &str, task: Task) -> Result<Self> {
        let mut cfg = Self::defaults(task);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, task: Task) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, task)
    }

    /// Sets one key; used for both file lines and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "env" => self.env = value.parse()?,
            "task" => {
                self.task = match value.to_ascii_lowercase().as_str() {
                    "ope" => Task::Ope,
                    "opo" => Task::Opo,
                    _ => return Err(Error::Config(format!("unknown task `{value}`"))),
                }
            }
            "methods" => self.methods = value.split(',').map(|m| m.trim().to_string()).filter(|m| !m.is_empty()).collect(),
            "df" => self.df = parse_list(key, value)?,
            "kappa" => self.kappa = parse_list(key, value)?,
            "K" | "k" => self.k = parse_list(key, value)?,
            "q" => self.q = parse_list(key, value)?,
            "n_episodes" => self.n_episodes = parse_one(key, value)?,
            "horizon" => self.horizon = parse_one(key, value)?,
            "replicates" => self.replicates = parse_one(key, value)?,
            "seed" => self.base_seed = parse_one(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "gamma" => self.gamma = parse_one(key, value)?,
            "epsilon" => self.epsilon = parse_one(key, value)?,
            "features" => {
                self.features = match value.to_ascii_lowercase().as_str() {
                    "onehot" => FeatureChoice::OneHot,
                    "poly" => FeatureChoice::Poly,
                    _ => return Err(Error::Config(format!("unknown feature map `{value}`"))),
                }
            }
            "ridge" => self.ridge = parse_one(key, value)?,
            "iterations" => self.iterations = parse_one(key, value)?,
            "scale_exponent" => self.scale_exponent = ScaleExponent::from_power(parse_one(key, value)?)?,
            "trim" => self.trim = parse_one(key, value)?,
            "dm_base" => {
                self.dm_base = match value.to_ascii_lowercase().as_str() {
                    "fqe" => DmBaseChoice::Fqe,
                    "lstd" => DmBaseChoice::Lstd,
                    _ => return Err(Error::Config(format!("unknown dm_base `{value}`"))),
                }
            }
            "vm_base" => {
                self.vm_base = match value.to_ascii_lowercase().as_str() {
                    "fqi" => VmBaseChoice::Fqi,
                    "lspi" => VmBaseChoice::Lspi,
                    _ => return Err(Error::Config(format!("unknown vm_base `{value}`"))),
                }
            }
            "timing" => self.timing = parse_one(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return fail("methods must not be empty".into());
        }
        if self.df.is_empty() || self.kappa.is_empty() || self.k.is_empty() || self.q.is_empty() {
            return fail("grids must not be empty".into());
        }
        if let Some(d) = self.df.iter().find(|&&d| !(d > 1.0)) {
            return fail(format!("df must exceed 1, got {d}"));
        }
        if let Some(k) = self.kappa.iter().find(|&&k| !(k >= 0.0) || !k.is_finite()) {
            return fail(format!("kappa must be >= 0, got {k}"));
        }
        if self.k.contains(&0) {
            return fail("K must be at least 1".into());
        }
        if let Some(q) = self.q.iter().find(|q| !(0.0..=0.5).contains(*q)) {
            return fail(format!("q must lie in [0, 0.5], got {q}"));
        }
        if self.replicates == 0 || self.n_episodes == 0 || self.horizon == 0 || self.iterations == 0 {
            return fail("replicates, n_episodes, horizon and iterations must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(self.ridge >= 0.0) {
            return fail(format!("ridge must be >= 0, got {}", self.ridge));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return fail(format!("trim must lie in [0, 0.5), got {}", self.trim));
        }
        Ok(())
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_one(key, v)).collect()
}
