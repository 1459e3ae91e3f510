//! Double-integrator swarm, centralized flocking expert and decentralized
//! delayed-filter GCNN controllers learned by imitation.

mod dataset;
mod policy;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphSignal, ShiftOperator};

pub use dataset::{
    generate_dataset, generate_trajectory, initial_state, load_dataset, save_dataset,
    training_samples, Dataset, DatasetManifest, Trajectory, DATASET_FORMAT_VERSION,
};
pub use policy::{
    controller_spec, rollout_expert, rollout_policy, scalability_sweep, train_controller,
    write_sweep_csv, Controller, Rollout, SweepRow, TrainedController,
};

/// Agents closer than this are treated as coincident.
pub const COLLISION_DISTANCE: f64 = 1e-6;
pub const N_FEATURES: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlockingConfig {
    pub dt: f64,
    pub steps: usize,
    pub u_max: f64,
    pub comm_radius: f64,
    /// initial velocities are uniform in `[-v, v]²`
    pub init_speed: f64,
    pub min_init_distance: f64,
    /// disc radius is `init_spread · √N`, keeping density fixed across N
    pub init_spread: f64,
    /// expert collision abort retries before giving up on a trajectory
    pub max_resamples: usize,
}

impl Default for FlockingConfig {
    fn default() -> Self {
        FlockingConfig {
            dt: 0.01,
            steps: 200,
            u_max: 10.0,
            comm_radius: 2.0,
            init_speed: 3.0,
            min_init_distance: 0.1,
            init_spread: 0.6,
            max_resamples: 100,
        }
    }
}

impl FlockingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.u_max > 0.0 && self.comm_radius > 0.0) {
            return Err(Error::InvalidArgument(
                "dt, u_max and comm_radius must be positive".into(),
            ));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        if !(self.init_spread > 0.0 && self.min_init_distance >= 0.0 && self.init_speed >= 0.0) {
            return Err(Error::InvalidArgument(
                "bad initial-condition parameters".into(),
            ));
        }
        Ok(())
    }
}

/// Positions, velocities and last applied accelerations, one row per agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub pos: Array2<f64>,
    pub vel: Array2<f64>,
    pub acc: Array2<f64>,
    pub t: usize,
    pub dt: f64,
}

impl SwarmState {
    pub fn new(pos: Array2<f64>, vel: Array2<f64>, dt: f64) -> Result<Self> {
        if pos.ncols() != 2 || vel.dim() != pos.dim() {
            return Err(Error::DimensionMismatch(format!(
                "positions {:?} and velocities {:?} must both be N x 2",
                pos.dim(),
                vel.dim()
            )));
        }
        let acc = Array2::zeros(pos.dim());
        let s = SwarmState {
            pos,
            vel,
            acc,
            t: 0,
            dt,
        };
        s.check_finite()?;
        Ok(s)
    }

    pub fn n_agents(&self) -> usize {
        self.pos.nrows()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self
            .pos
            .iter()
            .chain(&self.vel)
            .chain(&self.acc)
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("swarm state at step {}", self.t)))
        }
    }

    pub fn mean_velocity(&self) -> [f64; 2] {
        let n = self.n_agents() as f64;
        let mut m = [0.0; 2];
        for row in self.vel.rows() {
            m[0] += row[0];
            m[1] += row[1];
        }
        [m[0] / n, m[1] / n]
    }

    /// `Σ_i ‖v_i − v̄‖²`
    pub fn velocity_variation(&self) -> f64 {
        let m = self.mean_velocity();
        self.vel
            .rows()
            .into_iter()
            .map(|r| (r[0] - m[0]).powi(2) + (r[1] - m[1]).powi(2))
            .sum()
    }

    fn offset(&self, i: usize, j: usize) -> ([f64; 2], f64) {
        let d = [
            self.pos[[i, 0]] - self.pos[[j, 0]],
            self.pos[[i, 1]] - self.pos[[j, 1]],
        ];
        (d, d[0].hypot(d[1]))
    }
}

/// Saturate entrywise to `[-u_max, u_max]` and integrate one step:
/// `r ← r + v dt + ½ u dt²`, `v ← v + u dt`.
pub fn step_dynamics(state: &SwarmState, actions: &Array2<f64>, u_max: f64) -> Result<SwarmState> {
    if actions.dim() != state.pos.dim() {
        return Err(Error::DimensionMismatch(format!(
            "actions {:?} for {} agents",
            actions.dim(),
            state.n_agents()
        )));
    }
    if actions.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite(format!("action at step {}", state.t)));
    }
    let dt = state.dt;
    let u = actions.mapv(|a| a.clamp(-u_max, u_max));
    let pos = &state.pos + &(&state.vel * dt) + &(&u * (0.5 * dt * dt));
    let vel = &state.vel + &(&u * dt);
    let next = SwarmState {
        pos,
        vel,
        acc: u,
        t: state.t + 1,
        dt,
    };
    next.check_finite()?;
    Ok(next)
}

/// Binary proximity graph and its degree-normalized shift (isolated agents
/// get zero rows).
pub fn comm_graph(state: &SwarmState, radius: f64) -> Result<(Graph, ShiftOperator)> {
    let n = state.n_agents();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if state.offset(i, j).1 <= radius {
                edges.push((i, j, 1.0));
            }
        }
    }
    let g = Graph::new(n, edges)?;
    let s = ShiftOperator::degree_normalized_lenient(&g);
    Ok((g, s))
}

/// `U(d) = 1/d²` below `0.9 R`, tapered by a raised cosine to zero at `R`.
pub fn potential(d: f64, radius: f64) -> f64 {
    potential_and_derivative(d, radius).0
}

/// `(U(d), U'(d))`.
pub fn potential_and_derivative(d: f64, radius: f64) -> (f64, f64) {
    let start = 0.9 * radius;
    if d >= radius {
        return (0.0, 0.0);
    }
    let (u, du) = (1.0 / (d * d), -2.0 / (d * d * d));
    if d <= start {
        return (u, du);
    }
    let width = radius - start;
    let phase = std::f64::consts::PI * (d - start) / width;
    let w = 0.5 * (1.0 + phase.cos());
    let dw = -0.5 * std::f64::consts::PI / width * phase.sin();
    (u * w, du * w + u * dw)
}

/// Centralized expert: `u_i = −Σ_j (v_i − v_j) − Σ_{j≠i} ∇_{r_i} U(‖r_i − r_j‖)`
/// over all agents.
pub fn expert_action(state: &SwarmState, radius: f64) -> Result<Array2<f64>> {
    let n = state.n_agents();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "the expert needs at least 2 agents".into(),
        ));
    }
    let mut u = Array2::zeros((n, 2));
    for i in 0..n {
        let (mut ax, mut ay) = (0.0, 0.0);
        for j in 0..n {
            if i == j {
                continue;
            }
            ax -= state.vel[[i, 0]] - state.vel[[j, 0]];
            ay -= state.vel[[i, 1]] - state.vel[[j, 1]];
            let (d, dist) = state.offset(i, j);
            if dist < COLLISION_DISTANCE {
                return Err(Error::Collision(i.min(j), i.max(j)));
            }
            let (_, du) = potential_and_derivative(dist, radius);
            ax -= du * d[0] / dist;
            ay -= du * d[1] / dist;
        }
        u[[i, 0]] = ax;
        u[[i, 1]] = ay;
    }
    Ok(u)
}

/// One-hop features per agent:
/// `[Σ (v_i − v_j), Σ (r_i − r_j)/‖·‖⁴, Σ (r_i − r_j)/‖·‖²]` over neighbors.
pub fn agent_features(state: &SwarmState, graph: &Graph) -> Result<GraphSignal> {
    let n = state.n_agents();
    if graph.n_nodes() != n {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} nodes for {n} agents",
            graph.n_nodes()
        )));
    }
    let mut x = Array2::zeros((n, N_FEATURES));
    for (i, nbrs) in graph.neighbors().iter().enumerate() {
        for &j in nbrs {
            let (d, dist) = state.offset(i, j);
            if dist < COLLISION_DISTANCE {
                return Err(Error::Collision(i.min(j), i.max(j)));
            }
            let (d2, d4) = (dist * dist, dist.powi(4));
            for c in 0..2 {
                x[[i, c]] += state.vel[[i, c]] - state.vel[[j, c]];
                x[[i, 2 + c]] += d[c] / d4;
                x[[i, 4 + c]] += d[c] / d2;
            }
        }
    }
    Ok(GraphSignal(x))
}

/// `N⁻¹ Σ_t Σ_i ‖v_i(t) − v̄(t)‖²` over the states at which actions were
/// taken.
pub fn velocity_cost(states: &[SwarmState]) -> f64 {
    match states.first() {
        None => 0.0,
        Some(s0) => {
            states
                .iter()
                .map(SwarmState::velocity_variation)
                .sum::<f64>()
                / s0.n_agents() as f64
        }
    }
}
