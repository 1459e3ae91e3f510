use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    agent_features, comm_graph, expert_action, step_dynamics, velocity_cost, FlockingConfig,
    SwarmState,
};
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftOperator};
use crate::optim::{Sample, Target};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// One expert rollout. `states` has one more entry than `actions`; the cost
/// covers the states at which actions were taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub stream: u64,
    pub n_agents: usize,
    /// initial conditions discarded after an expert collision
    pub resamples: usize,
    pub states: Vec<SwarmState>,
    pub actions: Vec<Array2<f64>>,
    pub cost: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Shift operator and features at every step where an action was taken.
    pub fn observations(
        &self,
        cfg: &FlockingConfig,
    ) -> Result<Vec<(Arc<ShiftOperator>, GraphSignal)>> {
        self.states[..self.actions.len()]
            .iter()
            .map(|s| {
                let (g, shift) = comm_graph(s, cfg.comm_radius)?;
                Ok((Arc::new(shift), agent_features(s, &g)?))
            })
            .collect()
    }
}

/// Positions uniform in a disc of radius `init_spread · √N`, rejecting
/// points closer than `min_init_distance` to earlier ones; velocities
/// uniform in `[-init_speed, init_speed]²`.
pub fn initial_state<R: Rng + ?Sized>(
    cfg: &FlockingConfig,
    n: usize,
    rng: &mut R,
) -> Result<SwarmState> {
    let radius = cfg.init_spread * (n as f64).sqrt();
    let mut pos = Array2::<f64>::zeros((n, 2));
    let mut placed = 0;
    let mut tries = 0usize;
    while placed < n {
        tries += 1;
        if tries > 1000 * n.max(1) {
            return Err(Error::InvalidArgument(format!(
                "cannot place {n} agents {} m apart in a disc of radius {radius}",
                cfg.min_init_distance
            )));
        }
        let r = radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let ok =
            (0..placed).all(|j| (pos[[j, 0]] - x).hypot(pos[[j, 1]] - y) >= cfg.min_init_distance);
        if ok {
            pos[[placed, 0]] = x;
            pos[[placed, 1]] = y;
            placed += 1;
        }
    }
    let v = cfg.init_speed;
    let vel = Array2::from_shape_fn((n, 2), |_| {
        if v > 0.0 {
            rng.random_range(-v..=v)
        } else {
            0.0
        }
    });
    SwarmState::new(pos, vel, cfg.dt)
}

/// Random source for trajectory `stream` of a run seeded with `seed`.
pub(crate) fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn expert_rollout(
    cfg: &FlockingConfig,
    start: SwarmState,
) -> Result<(Vec<SwarmState>, Vec<Array2<f64>>)> {
    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut actions = Vec::with_capacity(cfg.steps);
    states.push(start);
    for _ in 0..cfg.steps {
        let s = states.last().expect("non-empty");
        let u = expert_action(s, cfg.comm_radius)?;
        let next = step_dynamics(s, &u, cfg.u_max)?;
        // record what was actually applied
        actions.push(next.acc.clone());
        states.push(next);
    }
    Ok((states, actions))
}

/// Expert trajectory; initial conditions that lead to a collision are
/// redrawn from the same stream.
pub fn generate_trajectory(
    cfg: &FlockingConfig,
    n_agents: usize,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = trajectory_rng(seed, stream);
    for resamples in 0..=cfg.max_resamples {
        let start = initial_state(cfg, n_agents, &mut rng)?;
        match expert_rollout(cfg, start) {
            Ok((states, actions)) => {
                let cost = velocity_cost(&states[..actions.len()]);
                return Ok(Trajectory {
                    seed,
                    stream,
                    n_agents,
                    resamples,
                    states,
                    actions,
                    cost,
                });
            }
            Err(Error::Collision(i, j)) => {
                log::debug!("trajectory {stream}: agents {i} and {j} collided, redrawing");
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidArgument(format!(
        "trajectory {stream}: expert collided in {} consecutive draws",
        cfg.max_resamples + 1
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_trajectories: usize,
    pub n_agents: usize,
    pub seed: u64,
    pub streams: Vec<u64>,
    pub resamples: usize,
    pub config: FlockingConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub trajectories: Vec<Trajectory>,
}

/// `n_traj` expert trajectories on streams `0..n_traj` of `seed`, generated
/// in parallel.
pub fn generate_dataset(
    cfg: &FlockingConfig,
    n_traj: usize,
    n_agents: usize,
    seed: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    let trajectories = (0..n_traj as u64)
        .into_par_iter()
        .map(|stream| generate_trajectory(cfg, n_agents, seed, stream))
        .collect::<Result<Vec<_>>>()?;
    let resamples = trajectories.iter().map(|t| t.resamples).sum();
    if resamples > 0 {
        log::info!("redrew {resamples} initial conditions after expert collisions");
    }
    Ok(Dataset {
        manifest: DatasetManifest {
            format_version: DATASET_FORMAT_VERSION,
            n_trajectories: n_traj,
            n_agents,
            seed,
            streams: (0..n_traj as u64).collect(),
            resamples,
            config: cfg.clone(),
        },
        trajectories,
    })
}

fn trajectory_file(i: usize) -> String {
    format!("trajectory_{i:05}.json")
}

/// `manifest.json` plus one JSON file per trajectory. Returns the written
/// file names.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(dataset.trajectories.len() + 1);
    for (i, t) in dataset.trajectories.iter().enumerate() {
        let name = trajectory_file(i);
        let path = dir.join(&name);
        fs::write(&path, serde_json::to_string(t)?).map_err(|e| Error::io(&path, e))?;
        files.push(name);
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&dataset.manifest)?)
        .map_err(|e| Error::io(&path, e))?;
    files.push("manifest.json".into());
    Ok(files)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "dataset format {} is not supported (expected {DATASET_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let trajectories = (0..manifest.n_trajectories)
        .map(|i| {
            let path = dir.join(trajectory_file(i));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let t: Trajectory = serde_json::from_str(&text)?;
            if t.n_agents != manifest.n_agents {
                return Err(Error::InvalidArgument(format!(
                    "{} has {} agents, manifest says {}",
                    path.display(),
                    t.n_agents,
                    manifest.n_agents
                )));
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        manifest,
        trajectories,
    })
}

/// One sample per (trajectory, step): newest-first shift and feature
/// histories of length `history` (shorter at the start of a trajectory) and
/// the expert action as a dense target.
pub fn training_samples(dataset: &Dataset, history: usize) -> Result<Vec<Sample>> {
    let cfg = &dataset.manifest.config;
    let per_traj = dataset
        .trajectories
        .par_iter()
        .map(|t| {
            let obs = t.observations(cfg)?;
            let mut window: VecDeque<&(Arc<ShiftOperator>, GraphSignal)> =
                VecDeque::with_capacity(history);
            let mut out = Vec::with_capacity(t.len());
            for (step, o) in obs.iter().enumerate() {
                window.push_front(o);
                window.truncate(history.max(1));
                out.push(Sample {
                    shifts: window.iter().map(|(s, _)| s.clone()).collect(),
                    inputs: window.iter().map(|(_, x)| x.clone()).collect(),
                    target: Target::Dense(t.actions[step].clone()),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_traj.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FlockingConfig {
        FlockingConfig {
            steps: 30,
            ..FlockingConfig::default()
        }
    }

    #[test]
    fn empty_dataset() {
        let d = generate_dataset(&small(), 0, 5, 1).unwrap();
        assert!(d.trajectories.is_empty());
    }

    #[test]
    fn initial_conditions_respect_spacing() {
        let cfg = FlockingConfig::default();
        let s = initial_state(&cfg, 50, &mut trajectory_rng(3, 0)).unwrap();
        let radius = cfg.init_spread * 50f64.sqrt();
        for i in 0..50 {
            assert!(s.pos[[i, 0]].hypot(s.pos[[i, 1]]) <= radius);
            assert!(s.vel.row(i).iter().all(|v| v.abs() <= 3.0));
            for j in 0..i {
                let d = (s.pos[[i, 0]] - s.pos[[j, 0]]).hypot(s.pos[[i, 1]] - s.pos[[j, 1]]);
                assert!(d >= 0.1);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_replayable() {
        let cfg = small();
        let a = generate_dataset(&cfg, 3, 6, 11).unwrap();
        let b = generate_dataset(&cfg, 3, 6, 11).unwrap();
        assert_eq!(a, b);
        for t in &a.trajectories {
            assert_eq!(t.states.len(), t.actions.len() + 1);
            let mut s = t.states[0].clone();
            for (u, want) in t.actions.iter().zip(&t.states[1..]) {
                s = step_dynamics(&s, u, cfg.u_max).unwrap();
                assert!((&s.pos - &want.pos).iter().all(|d| d.abs() <= 1e-10));
                assert!((&s.vel - &want.vel).iter().all(|d| d.abs() <= 1e-10));
            }
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let d = generate_dataset(&small(), 2, 4, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = save_dataset(&d, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        assert_eq!(load_dataset(dir.path()).unwrap(), d);
    }

    #[test]
    fn sample_histories() {
        let d = generate_dataset(&small(), 2, 4, 5).unwrap();
        let samples = training_samples(&d, 4).unwrap();
        assert_eq!(samples.len(), 2 * 30);
        assert_eq!(samples[0].inputs.len(), 1);
        assert_eq!(samples[2].inputs.len(), 3);
        assert_eq!(samples[10].inputs.len(), 4);
        let obs = d.trajectories[0].observations(&d.manifest.config).unwrap();
        assert_eq!(samples[10].inputs[0], obs[10].1);
        assert_eq!(samples[10].inputs[3], obs[7].1);
        assert_eq!(samples[10].shifts[1].to_dense(), obs[9].0.to_dense());
    }
}
