use std::collections::VecDeque;
use std::io::Write;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{initial_state, training_samples, trajectory_rng, Dataset};
use super::{
    agent_features, comm_graph, expert_action, step_dynamics, velocity_cost, FlockingConfig,
    SwarmState, N_FEATURES,
};
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftOperator};
use crate::neural::{LayerSpec, Model, ModelSpec, Nonlinearity, Readout, ShiftMode};
use crate::optim::{self, BatchRecord, LossKind, TrainConfig};

/// Delayed FIR bank `6 → features` of order `order`, then a per-agent
/// affine readout to a 2-D acceleration.
pub fn controller_spec(features: usize, order: usize, nonlinearity: Nonlinearity) -> ModelSpec {
    ModelSpec {
        layers: vec![LayerSpec::fir(N_FEATURES, features, order, nonlinearity)],
        readout: Readout::PerNodeLinear { out_dim: 2 },
        shift_mode: ShiftMode::TimeVarying,
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Controller<'a> {
    Expert,
    Learned(&'a Model),
    /// `u = 0`
    Idle,
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Expert => "expert",
            Controller::Learned(_) => "learned",
            Controller::Idle => "idle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub states: Vec<SwarmState>,
    /// `+∞` when the rollout diverged
    pub cost: f64,
    pub diverged: bool,
}

/// Closed-loop rollout from the first initial condition of `(seed, stream)`.
/// A learned controller sees newest-first histories of shifts and features.
/// Non-finite states or coincident agents end the run as diverged.
pub fn rollout_policy(
    controller: Controller<'_>,
    cfg: &FlockingConfig,
    n_agents: usize,
    seed: u64,
    stream: u64,
) -> Result<Rollout> {
    cfg.validate()?;
    if let Controller::Learned(m) = controller {
        if m.spec.shift_mode != ShiftMode::TimeVarying
            || m.spec.in_features() != N_FEATURES
            || m.spec.out_features() != 2
        {
            return Err(Error::InvalidModel(
                "a flocking controller is a time-varying model mapping 6 features to 2 outputs"
                    .into(),
            ));
        }
    }
    let history = match controller {
        Controller::Learned(m) => m.spec.history_len(),
        _ => 1,
    };
    let mut rng = trajectory_rng(seed, stream);
    let mut states = vec![initial_state(cfg, n_agents, &mut rng)?];
    let mut shifts: VecDeque<ShiftOperator> = VecDeque::with_capacity(history);
    let mut feats: VecDeque<GraphSignal> = VecDeque::with_capacity(history);
    for _ in 0..cfg.steps {
        let s = states.last().expect("non-empty");
        let action = match controller {
            Controller::Expert => expert_action(s, cfg.comm_radius),
            Controller::Idle => Ok(Array2::zeros((n_agents, 2))),
            Controller::Learned(m) => learned_action(m, s, cfg, &mut shifts, &mut feats, history),
        };
        let next = action.and_then(|u| step_dynamics(s, &u, cfg.u_max));
        match next {
            Ok(next) => states.push(next),
            Err(Error::Collision(..) | Error::NonFinite(_)) => {
                return Ok(Rollout {
                    states,
                    cost: f64::INFINITY,
                    diverged: true,
                })
            }
            Err(e) => return Err(e),
        }
    }
    let cost = velocity_cost(&states[..cfg.steps]);
    Ok(Rollout {
        states,
        cost,
        diverged: !cost.is_finite(),
    })
}

fn learned_action(
    model: &Model,
    s: &SwarmState,
    cfg: &FlockingConfig,
    shifts: &mut VecDeque<ShiftOperator>,
    feats: &mut VecDeque<GraphSignal>,
    history: usize,
) -> Result<Array2<f64>> {
    let (g, shift) = comm_graph(s, cfg.comm_radius)?;
    feats.push_front(agent_features(s, &g)?);
    shifts.push_front(shift);
    feats.truncate(history);
    shifts.truncate(history);
    let refs: Vec<&ShiftOperator> = shifts.iter().collect();
    let xs: Vec<GraphSignal> = feats.iter().cloned().collect();
    Ok(model.forward_history(&refs, &xs)?.0.into_inner())
}

/// Expert rollout on the same initial condition a learned controller sees.
pub fn rollout_expert(
    cfg: &FlockingConfig,
    n_agents: usize,
    seed: u64,
    stream: u64,
) -> Result<Rollout> {
    rollout_policy(Controller::Expert, cfg, n_agents, seed, stream)
}

#[derive(Clone, Debug)]
pub struct TrainedController {
    pub model: Model,
    pub history: Vec<BatchRecord>,
}

/// Imitation learning on per-step snapshots of the expert dataset with an
/// MSE loss. Initialization and shuffling both derive from `train.seed`.
pub fn train_controller(
    dataset: &Dataset,
    spec: ModelSpec,
    train: &TrainConfig,
    on_batch: impl FnMut(&BatchRecord),
) -> Result<TrainedController> {
    if spec.shift_mode != ShiftMode::TimeVarying {
        return Err(Error::InvalidModel(
            "flocking controllers are time-varying".into(),
        ));
    }
    let samples = training_samples(dataset, spec.history_len())?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty flocking dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    rng.set_stream(1);
    let mut model = Model::init(spec, None, &mut rng)?;
    let history = optim::train(&mut model, &samples, LossKind::Mse, train, on_batch)?;
    Ok(TrainedController { model, history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_agents: usize,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub model: String,
    pub diverged: usize,
}

/// Mean and sample standard deviation of the cost over `trials` rollouts
/// per team size, on streams `0..trials` of `seed`. Diverged runs count
/// with infinite cost.
pub fn scalability_sweep(
    controller: Controller<'_>,
    label: &str,
    cfg: &FlockingConfig,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "sweep needs at least one trial".into(),
        ));
    }
    sizes
        .iter()
        .map(|&n| {
            let costs = (0..trials as u64)
                .into_par_iter()
                .map(|stream| rollout_policy(controller, cfg, n, seed, stream).map(|r| r.cost))
                .collect::<Result<Vec<f64>>>()?;
            let mean = costs.iter().sum::<f64>() / trials as f64;
            let std = if trials > 1 {
                (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok(SweepRow {
                n_agents: n,
                mean_cost: mean,
                std_cost: std,
                model: label.to_string(),
                diverged: costs.iter().filter(|c| !c.is_finite()).count(),
            })
        })
        .collect()
}

/// `n_agents,mean_cost,std_cost,model`.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "n_agents,mean_cost,std_cost,model")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.n_agents, r.mean_cost, r.std_cost, r.model
        )?;
    }
    Ok(())
}
