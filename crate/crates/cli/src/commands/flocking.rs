use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Subcommand};
use gspnn_core::flocking::{
    controller_spec, generate_dataset, load_dataset, rollout_policy, save_dataset,
    scalability_sweep, train_controller, write_sweep_csv, Controller,
};
use gspnn_core::neural::{Model, Nonlinearity};
use gspnn_core::optim::write_training_log;
use rayon::prelude::*;

use super::{require_dir, require_file};
use crate::config::RunConfig;
use crate::manifest::OutputDir;

const DATASET_DIR: &str = "dataset";

#[derive(Subcommand, Clone, Debug)]
pub enum FlockingCmd {
    /// Roll out the expert and store the trajectories under `dataset/`.
    Generate {
        #[arg(long)]
        n_trajectories: Option<usize>,
        #[arg(long)]
        n_agents: Option<usize>,
    },
    /// Imitation-train a controller on a generated dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// tanh for the GCNN controller, identity for the linear filter
        #[arg(long)]
        nonlinearity: Option<Nonlinearity>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Per-rollout costs at one team size.
    Evaluate {
        #[command(flatten)]
        controller: ControllerArgs,
        #[arg(long)]
        n_agents: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Mean and standard deviation of the cost across team sizes.
    Sweep {
        #[command(flatten)]
        controller: ControllerArgs,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Args, Clone, Debug)]
#[group(required = true, multiple = false)]
pub struct ControllerArgs {
    /// trained controller checkpoint
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// use the centralized expert
    #[arg(long)]
    expert: bool,
    /// apply no control
    #[arg(long)]
    idle: bool,
}

fn controller_label(model: &Model) -> &'static str {
    match model.spec.layers.first().map(|l| l.nonlinearity) {
        Some(Nonlinearity::Identity) => "linear",
        _ => "gcnn",
    }
}

/// Resolve the controller, call `f` with it, and return the checkpoint as
/// an input when there is one.
fn with_controller<T>(
    args: &ControllerArgs,
    f: impl FnOnce(Controller<'_>, &str) -> Result<T>,
) -> Result<(T, Vec<PathBuf>)> {
    if let Some(path) = &args.checkpoint {
        require_file(path, "checkpoint")?;
        let model = Model::load(path)?;
        let label = controller_label(&model);
        return Ok((f(Controller::Learned(&model), label)?, vec![path.clone()]));
    }
    let c = if args.expert {
        Controller::Expert
    } else {
        Controller::Idle
    };
    Ok((f(c, c.name())?, vec![]))
}

pub fn run(cmd: &FlockingCmd, cfg: &mut RunConfig, out: &mut OutputDir) -> Result<Vec<PathBuf>> {
    match cmd {
        FlockingCmd::Generate {
            n_trajectories,
            n_agents,
        } => {
            if let Some(n) = n_trajectories {
                cfg.controller.n_trajectories = *n;
            }
            if let Some(n) = n_agents {
                cfg.controller.n_agents = *n;
            }
            let c = &cfg.controller;
            let d = generate_dataset(&cfg.flocking, c.n_trajectories, c.n_agents, cfg.seed)?;
            let mean = d.trajectories.iter().map(|t| t.cost).sum::<f64>()
                / d.trajectories.len().max(1) as f64;
            log::info!(
                "{} expert trajectories, mean cost {mean:.3}, {} resampled initial conditions",
                d.trajectories.len(),
                d.manifest.resamples
            );
            let dir = out.root().join(DATASET_DIR);
            let names = save_dataset(&d, &dir)?;
            out.record(DATASET_DIR, &names);
            Ok(vec![])
        }
        FlockingCmd::Train {
            dataset,
            nonlinearity,
            epochs,
        } => {
            if let Some(nl) = nonlinearity {
                cfg.controller.nonlinearity = *nl;
            }
            if let Some(e) = epochs {
                cfg.controller.epochs = *e;
            }
            require_dir(dataset, "dataset")?;
            let d = load_dataset(dataset)?;
            let c = &cfg.controller;
            let spec = controller_spec(c.features, c.order, c.nonlinearity);
            let trained = train_controller(&d, spec, &c.train_config(cfg.seed), |b| {
                log::debug!("epoch {} batch {} loss {:.6}", b.epoch, b.batch, b.loss)
            })?;
            if let Some(last) = trained.history.last() {
                log::info!("final batch loss {:.6}", last.loss);
            }
            trained.model.save(&out.path("controller.json")?, None)?;
            let mut w = out.writer("train_log.csv")?;
            write_training_log(&mut w, &trained.history)?;
            w.flush()?;
            Ok(vec![dataset.clone()])
        }
        FlockingCmd::Evaluate {
            controller,
            n_agents,
            trials,
        } => {
            if let Some(t) = trials {
                cfg.controller.eval_trials = *t;
            }
            let n = n_agents.unwrap_or(cfg.controller.n_agents);
            let seed = cfg.seed + cfg.controller.eval_seed_offset;
            let trials = cfg.controller.eval_trials as u64;
            let flock = cfg.flocking.clone();
            let (rows, ins) = with_controller(controller, |c, label| {
                let runs = (0..trials)
                    .into_par_iter()
                    .map(|stream| rollout_policy(c, &flock, n, seed, stream))
                    .collect::<gspnn_core::Result<Vec<_>>>()?;
                Ok((runs, label.to_string()))
            })?;
            let (runs, label) = rows;
            let mut w = out.writer("costs.csv")?;
            writeln!(w, "trial,n_agents,cost,diverged,model")?;
            for (i, r) in runs.iter().enumerate() {
                writeln!(w, "{i},{n},{},{},{label}", r.cost, r.diverged)?;
            }
            w.flush()?;
            let mean = runs.iter().map(|r| r.cost).sum::<f64>() / runs.len().max(1) as f64;
            log::info!(
                "{label}: mean cost {mean:.3} over {} rollouts of {n} agents",
                runs.len()
            );
            Ok(ins)
        }
        FlockingCmd::Sweep {
            controller,
            sizes,
            trials,
        } => {
            if let Some(s) = sizes {
                cfg.controller.sizes = s.clone();
            }
            if let Some(t) = trials {
                cfg.controller.eval_trials = *t;
            }
            if cfg.controller.sizes.is_empty() {
                bail!("the sweep needs at least one team size");
            }
            let seed = cfg.seed + cfg.controller.eval_seed_offset;
            let (rows, ins) = with_controller(controller, |c, label| {
                Ok(scalability_sweep(
                    c,
                    label,
                    &cfg.flocking,
                    &cfg.controller.sizes,
                    cfg.controller.eval_trials,
                    seed,
                )?)
            })?;
            for r in &rows {
                log::info!(
                    "N = {}: {:.3} ± {:.3} ({} diverged)",
                    r.n_agents,
                    r.mean_cost,
                    r.std_cost,
                    r.diverged
                );
            }
            let mut w = out.writer("sweep.csv")?;
            write_sweep_csv(&mut w, &rows)?;
            w.flush()?;
            Ok(ins)
        }
    }
}
