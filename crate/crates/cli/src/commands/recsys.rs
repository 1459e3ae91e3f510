use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;
use gspnn_core::neural::{FilterFamily, Model, ModelSpec, Nonlinearity};
use gspnn_core::optim::write_training_log;
use gspnn_core::recsys::{
    ingest_movielens, train_recommender, transfer_rmse, write_metrics_csv, MetricRow, RecModelKind,
    RecsysData,
};

use super::{require_dir, require_file};
use crate::config::{RunConfig, DATA_DIR_ENV};
use crate::manifest::OutputDir;

#[derive(Subcommand, Clone, Debug)]
pub enum RecsysCmd {
    /// Train a model per seed on the target movie and report its test RMSE.
    Train {
        /// fir, gcnn, arma or edgenet
        #[arg(long, default_value = "gcnn")]
        model: RecModelKind,
        /// number of consecutive seeds starting at --seed
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        target_item: Option<u32>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Test RMSE of a checkpoint on an item, using the --seed split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// defaults to the configured target movie
        #[arg(long)]
        item: Option<u32>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// RMSE of a checkpoint read at another movie's node, without retraining.
    Transfer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// defaults to the configured transfer movie
        #[arg(long)]
        item: Option<u32>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

/// Model label for a checkpoint, following the recommender naming.
fn kind_of(spec: &ModelSpec) -> &'static str {
    match spec.layers.first().map(|l| (l.family, l.nonlinearity)) {
        Some((FilterFamily::Fir, Nonlinearity::Identity)) => RecModelKind::Fir.name(),
        Some((FilterFamily::Fir, _)) => RecModelKind::Gcnn.name(),
        Some((FilterFamily::Arma, _)) => RecModelKind::Arma.name(),
        Some((FilterFamily::EdgeVarying, _)) => RecModelKind::Edgenet.name(),
        None => "unknown",
    }
}

fn data_file(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.resolved_data_dir().with_context(|| {
        format!("no MovieLens directory: pass --data-dir or set {DATA_DIR_ENV}")
    })?;
    require_dir(&dir, "data directory")?;
    let file = dir.join("u.data");
    require_file(&file, "ratings file")?;
    Ok(file)
}

fn load(cfg: &RunConfig, file: &Path) -> Result<RecsysData> {
    let full = ingest_movielens(file)?;
    log::info!("{} ratings from {}", full.len(), file.display());
    Ok(RecsysData::prepare(&full, &cfg.recsys)?)
}

pub fn run(cmd: &RecsysCmd, cfg: &mut RunConfig, out: &mut OutputDir) -> Result<Vec<PathBuf>> {
    match cmd {
        RecsysCmd::Train {
            model,
            seeds,
            data_dir,
            target_item,
            epochs,
        } => {
            if let Some(d) = data_dir {
                cfg.data_dir = Some(d.clone());
            }
            if let Some(t) = target_item {
                cfg.recsys.target_item = *t;
            }
            if let Some(e) = epochs {
                cfg.recsys.epochs = *e;
            }
            let file = data_file(cfg)?;
            let data = load(cfg, &file)?;
            let mut rows = Vec::new();
            for seed in cfg.seed..cfg.seed + seeds {
                let run = train_recommender(&data, *model, &cfg.recsys, seed, |b| {
                    log::debug!("epoch {} batch {} loss {:.6}", b.epoch, b.batch, b.loss)
                })?;
                log::info!(
                    "{} seed {seed}: train RMSE {:.4}, test RMSE {:.4}",
                    model.name(),
                    run.train_rmse,
                    run.test_rmse
                );
                let stem = format!("{}_seed{seed}", model.name());
                run.model
                    .save(&out.path(&format!("{stem}.json"))?, Some(data.shift.kind()))?;
                let mut w = out.writer(&format!("{stem}_train_log.csv"))?;
                write_training_log(&mut w, &run.history)?;
                w.flush()?;
                rows.push(MetricRow {
                    model: model.name().to_string(),
                    seed,
                    target: cfg.recsys.target_item,
                    rmse: run.test_rmse,
                });
            }
            let mut w = out.writer("metrics.csv")?;
            write_metrics_csv(&mut w, &rows)?;
            w.flush()?;
            Ok(vec![file])
        }
        RecsysCmd::Eval {
            checkpoint,
            item,
            data_dir,
        }
        | RecsysCmd::Transfer {
            checkpoint,
            item,
            data_dir,
        } => {
            let transfer = matches!(cmd, RecsysCmd::Transfer { .. });
            if let Some(d) = data_dir {
                cfg.data_dir = Some(d.clone());
            }
            require_file(checkpoint, "checkpoint")?;
            let file = data_file(cfg)?;
            let model = Model::load(checkpoint)?;
            let data = load(cfg, &file)?;
            let default_item = if transfer {
                cfg.recsys.transfer_item
            } else {
                cfg.recsys.target_item
            };
            let target = item.unwrap_or(default_item);
            // transfer and eval share the path: the other item's test users
            let rmse = transfer_rmse(&model, &data, target, cfg.recsys.split, cfg.seed)?;
            log::info!("RMSE at item {target}: {rmse:.4}");
            let mut w = out.writer("metrics.csv")?;
            write_metrics_csv(
                &mut w,
                &[MetricRow {
                    model: kind_of(&model.spec).to_string(),
                    seed: cfg.seed,
                    target,
                    rmse,
                }],
            )?;
            w.flush()?;
            Ok(vec![file, checkpoint.clone()])
        }
    }
}
