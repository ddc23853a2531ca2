//! Offline datasets: collection under a behavior policy, reward-noise
//! injection, trajectory-level K-fold partitioning and bootstrap resampling.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{sim::simulate, Policy, TabularMdp};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::rng::{derive_seed, open_unit, rng_from_seed, sample_categorical};

const TRAJECTORY_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// One logged (S, A, R, S') tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub trajectory_id: usize,
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMeta {
    pub behavior: String,
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
    /// For resampled datasets: source trajectory id of each trajectory.
    pub lineage: Option<Vec<usize>>,
}

/// Immutable bag of transitions grouped by trajectory. Tuples are stored
/// contiguously per trajectory in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    n_states: usize,
    n_actions: usize,
    tuples: Vec<Transition>,
    offsets: Vec<usize>,
    meta: DatasetMeta,
}

impl OfflineDataset {
    /// Builds a dataset from trajectories; trajectory ids are assigned by
    /// position.
    pub fn from_trajectories(
        n_states: usize,
        n_actions: usize,
        trajectories: Vec<Vec<Transition>>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let mut tuples = Vec::with_capacity(trajectories.iter().map(Vec::len).sum());
        let mut offsets = Vec::with_capacity(trajectories.len() + 1);
        offsets.push(0);
        for (id, traj) in trajectories.into_iter().enumerate() {
            for mut t in traj {
                if t.state >= n_states || t.next_state >= n_states || t.action >= n_actions {
                    return Err(Error::OutOfDomain {
                        state: t.state.max(t.next_state),
                        action: t.action,
                        n_states,
                        n_actions,
                    });
                }
                if !t.reward.is_finite() {
                    return Err(Error::InvalidParameter("non-finite reward".into()));
                }
                t.trajectory_id = id;
                tuples.push(t);
            }
            offsets.push(tuples.len());
        }
        Ok(OfflineDataset {
            n_states,
            n_actions,
            tuples,
            offsets,
            meta,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_trajectories(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Transition] {
        &self.tuples
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn trajectory(&self, id: usize) -> &[Transition] {
        &self.tuples[self.offsets[id]..self.offsets[id + 1]]
    }

    /// Tuples of the given trajectories, in the order given.
    pub fn gather(&self, ids: &[usize]) -> Vec<Transition> {
        ids.iter().flat_map(|&id| self.trajectory(id).iter().copied()).collect()
    }

    /// FNV-1a hash over every tuple; identifies the exact data consumed.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for t in &self.tuples {
            feed(t.trajectory_id as u64);
            feed(t.step as u64);
            feed(t.state as u64);
            feed(t.action as u64);
            feed(t.reward.to_bits());
            feed(t.next_state as u64);
        }
        h
    }

    /// One tuple per line: `trajectory_id,step,s,a,r,s_next`.
    pub fn write_columnar<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.tuples {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                t.trajectory_id, t.step, t.state, t.action, t.reward, t.next_state
            )?;
        }
        Ok(())
    }

    pub fn read_columnar<R: BufRead>(input: R, n_states: usize, n_actions: usize) -> Result<Self> {
        let mut trajectories: Vec<Vec<Transition>> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 columns, found {}", fields.len())));
            }
            let int = |k: usize| fields[k].parse::<usize>().map_err(|e| bad(e.to_string()));
            let t = Transition {
                trajectory_id: int(0)?,
                step: int(1)?,
                state: int(2)?,
                action: int(3)?,
                reward: fields[4].parse::<f64>().map_err(|e| bad(e.to_string()))?,
                next_state: int(5)?,
            };
            match t.trajectory_id {
                id if id == trajectories.len() => trajectories.push(vec![t]),
                id if id + 1 == trajectories.len() => trajectories[id].push(t),
                id => return Err(bad(format!("trajectory {id} out of order"))),
            }
        }
        Self::from_trajectories(n_states, n_actions, trajectories, DatasetMeta::default())
    }
}

/// Rolls out `n_episodes` episodes of length `horizon` under `behavior` and
/// adds one fresh noise draw to every reward. Trajectories and noise use
/// separate streams derived from `seed`, so changing the noise spec leaves
/// the visited states and actions untouched.
pub fn collect(
    mdp: &TabularMdp,
    behavior: &Policy,
    n_episodes: usize,
    horizon: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<OfflineDataset> {
    if n_episodes == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("n_episodes and horizon must be positive".into()));
    }
    behavior.check_shape(mdp.n_states(), mdp.n_actions())?;
    let pi = behavior.to_tabular();
    let mut rng = rng_from_seed(derive_seed(seed, TRAJECTORY_STREAM));
    let eps = noise.sample(n_episodes * horizon, derive_seed(seed, NOISE_STREAM));
    let mut eps = eps.into_iter();
    let trajectories = (0..n_episodes)
        .map(|id| {
            simulate(mdp, &pi, horizon, &mut rng)
                .into_iter()
                .enumerate()
                .map(|(step, st)| Transition {
                    trajectory_id: id,
                    step,
                    state: st.state,
                    action: st.action,
                    reward: st.reward + eps.next().expect("one draw per tuple"),
                    next_state: st.next_state,
                })
                .collect()
        })
        .collect();
    OfflineDataset::from_trajectories(
        mdp.n_states(),
        mdp.n_actions(),
        trajectories,
        DatasetMeta {
            behavior: format!("{behavior:?}").chars().take(200).collect(),
            noise: Some(noise.clone()),
            seed,
            lineage: None,
        },
    )
}

/// Generative-model data: `per_pair` single-step trajectories from every
/// (s, a), interleaved so consecutive ids sweep over all pairs.
pub fn collect_exhaustive(
    mdp: &TabularMdp,
    per_pair: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<OfflineDataset> {
    if per_pair == 0 {
        return Err(Error::InvalidParameter("per_pair must be positive".into()));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut rng = rng_from_seed(derive_seed(seed, TRAJECTORY_STREAM));
    let eps = noise.sample(per_pair * ns * na, derive_seed(seed, NOISE_STREAM));
    let mut trajectories = Vec::with_capacity(per_pair * ns * na);
    for j in 0..per_pair {
        for s in 0..ns {
            for a in 0..na {
                let next = sample_categorical(mdp.transition_row(s, a), open_unit(&mut rng));
                let idx = (j * ns + s) * na + a;
                trajectories.push(vec![Transition {
                    trajectory_id: idx,
                    step: 0,
                    state: s,
                    action: a,
                    reward: mdp.reward(s, a) + eps[idx],
                    next_state: next,
                }]);
            }
        }
    }
    OfflineDataset::from_trajectories(
        ns,
        na,
        trajectories,
        DatasetMeta {
            behavior: "exhaustive".into(),
            noise: Some(noise.clone()),
            seed,
            lineage: None,
        },
    )
}

/// Trajectory-to-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPartition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, trajectory_id: usize) -> usize {
        self.assignment[trajectory_id]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Trajectory ids of each fold, ascending.
    pub fn folds(&self) -> Vec<Vec<usize>> {
        let mut folds = vec![Vec::new(); self.k];
        for (id, &f) in self.assignment.iter().enumerate() {
            folds[f].push(id);
        }
        folds
    }

    /// Tuples belonging to each fold.
    pub fn fold_tuples(&self, data: &OfflineDataset) -> Vec<Vec<Transition>> {
        self.folds().iter().map(|ids| data.gather(ids)).collect()
    }
}

/// Shuffles trajectory ids by seed and deals them round-robin into `k` folds.
pub fn partition(data: &OfflineDataset, k: usize, seed: u64) -> Result<FoldPartition> {
    let n = data.n_trajectories();
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("K = {k} exceeds {n} trajectories")));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng_from_seed(seed));
    let mut assignment = vec![0; n];
    for (pos, id) in ids.into_iter().enumerate() {
        assignment[id] = pos % k;
    }
    Ok(FoldPartition { k, assignment })
}

/// Source trajectory ids of `k` bootstrap resamples, each of size n.
pub fn bootstrap_indices(n_trajectories: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    (0..k)
        .map(|_| (0..n_trajectories).map(|_| rng.random_range(0..n_trajectories)).collect())
        .collect()
}

/// `k` datasets, each resampling whole trajectories with replacement.
pub fn bootstrap_folds(data: &OfflineDataset, k: usize, seed: u64) -> Result<Vec<OfflineDataset>> {
    let n = data.n_trajectories();
    if n == 0 {
        return Err(Error::Empty("dataset has no trajectories"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    bootstrap_indices(n, k, seed)
        .into_iter()
        .map(|ids| {
            let trajectories = ids.iter().map(|&id| data.trajectory(id).to_vec()).collect();
            OfflineDataset::from_trajectories(
                data.n_states,
                data.n_actions,
                trajectories,
                DatasetMeta {
                    lineage: Some(ids),
                    ..data.meta.clone()
                },
            )
        })
        .collect()
}
