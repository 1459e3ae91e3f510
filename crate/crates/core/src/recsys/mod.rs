//! Rating prediction on an item similarity graph: ingestion, graph
//! construction, masked per-user samples and RMSE evaluation.

mod ratings;
mod similarity;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftKind, ShiftOperator};
use crate::neural::{LayerSpec, Model, ModelSpec, Nonlinearity, Readout, ShiftMode};
use crate::optim::{self, BatchRecord, LossKind, Sample, Target, TrainConfig};

pub use ratings::{ingest_movielens, parse_ratings, select_top_items, Rating, RatingsTable};
pub use similarity::{build_similarity, pearson_matrix, SimilarityGraph};

/// MovieLens id of Star Wars (1977).
pub const STAR_WARS: u32 = 50;
/// MovieLens id of Contact (1997).
pub const CONTACT: u32 = 258;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecModelKind {
    /// linear FIR filter bank
    Fir,
    /// FIR filter bank with ReLU
    Gcnn,
    Arma,
    Edgenet,
}

impl RecModelKind {
    pub const ALL: [RecModelKind; 4] = [
        RecModelKind::Fir,
        RecModelKind::Gcnn,
        RecModelKind::Arma,
        RecModelKind::Edgenet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecModelKind::Fir => "fir",
            RecModelKind::Gcnn => "gcnn",
            RecModelKind::Arma => "arma",
            RecModelKind::Edgenet => "edgenet",
        }
    }
}

impl fmt::Display for RecModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RecModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RecModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown recommender model `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecsysConfig {
    pub top_items: usize,
    pub top_k: usize,
    pub target_item: u32,
    pub transfer_item: u32,
    pub split: f64,
    pub features: usize,
    pub order: usize,
    pub arma_poles: usize,
    pub arma_jacobi_iters: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for RecsysConfig {
    fn default() -> Self {
        RecsysConfig {
            top_items: 200,
            top_k: 10,
            target_item: STAR_WARS,
            transfer_item: CONTACT,
            split: 0.9,
            features: 64,
            order: 4,
            arma_poles: 1,
            arma_jacobi_iters: 1,
            epochs: 40,
            batch_size: 5,
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

impl RecsysConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            seed,
            shuffle: true,
        }
    }

    pub fn model_spec(&self, kind: RecModelKind) -> ModelSpec {
        let (f, k) = (self.features, self.order);
        let layer = match kind {
            RecModelKind::Fir => LayerSpec::fir(1, f, k, Nonlinearity::Identity),
            RecModelKind::Gcnn => LayerSpec::fir(1, f, k, Nonlinearity::Relu),
            RecModelKind::Arma => LayerSpec::arma(
                1,
                f,
                k,
                self.arma_poles,
                self.arma_jacobi_iters,
                Nonlinearity::Relu,
            ),
            RecModelKind::Edgenet => LayerSpec::edge_varying(1, f, k, Nonlinearity::Relu),
        };
        ModelSpec {
            layers: vec![layer],
            readout: Readout::PerNodeLinear { out_dim: 1 },
            shift_mode: ShiftMode::Static,
        }
    }
}

/// One user's ratings with the target entry hidden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecSample {
    pub user: u32,
    pub input: GraphSignal,
    pub target_node: usize,
    pub target: f64,
}

impl RecSample {
    pub fn to_sample(&self, shift: &Arc<ShiftOperator>) -> Sample {
        Sample::new_static(
            shift.clone(),
            self.input.clone(),
            Target::Entries(vec![(self.target_node, 0, self.target)]),
        )
    }
}

/// Adjacency of the similarity graph divided by its largest eigenvalue.
pub fn item_shift(graph: &SimilarityGraph) -> Result<ShiftOperator> {
    let s = ShiftOperator::from_graph(&graph.graph, ShiftKind::Adjacency)?.eigendecompose()?;
    let lmax = s
        .eig()
        .expect("computed")
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if lmax <= 0.0 {
        return Err(Error::InvalidGraph("similarity graph has no edges".into()));
    }
    Ok(s.scaled(1.0 / lmax))
}

/// Per-user samples for everyone who rated `target_item`, with a seeded
/// user-level split. The first `round(split · users)` shuffled users train.
pub fn make_samples(
    table: &RatingsTable,
    graph: &SimilarityGraph,
    target_item: u32,
    split: f64,
    seed: u64,
) -> Result<(Vec<RecSample>, Vec<RecSample>)> {
    if !(0.0..=1.0).contains(&split) {
        return Err(Error::InvalidArgument(format!(
            "split {split} is outside [0, 1]"
        )));
    }
    let target_node = graph.node_of(target_item)?;
    let n = graph.items.len();
    let by_user = table.by_user();
    let mut samples = Vec::new();
    for &user in table.users() {
        let Some(rated) = by_user.get(&user) else {
            continue;
        };
        let Some(&target) = rated.get(&target_item) else {
            continue;
        };
        let mut x = GraphSignal::zeros(n, 1);
        for (&item, &r) in rated {
            if item == target_item {
                continue;
            }
            if let Ok(node) = graph.node_of(item) {
                x.0[[node, 0]] = r as f64;
            }
        }
        samples.push(RecSample {
            user,
            input: x,
            target_node,
            target: target as f64,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    samples.shuffle(&mut rng);
    let n_train = ((split * samples.len() as f64).round() as usize).min(samples.len());
    let test = samples.split_off(n_train);
    Ok((samples, test))
}

pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("RMSE of an empty sample set".into()));
    }
    let mse = pairs.iter().map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pairs.len() as f64;
    Ok(mse.sqrt())
}

/// `(prediction, target)` at each sample's target node.
pub fn predictions(
    model: &Model,
    shift: &ShiftOperator,
    samples: &[RecSample],
) -> Result<Vec<(f64, f64)>> {
    samples
        .iter()
        .map(|s| {
            Ok((
                model.predict(shift, &s.input)?.0[[s.target_node, 0]],
                s.target,
            ))
        })
        .collect()
}

pub fn evaluate_rmse(model: &Model, shift: &ShiftOperator, samples: &[RecSample]) -> Result<f64> {
    rmse(&predictions(model, shift, samples)?)
}

/// Top items, similarity graph and shift built once and shared by all runs.
#[derive(Clone, Debug)]
pub struct RecsysData {
    pub table: RatingsTable,
    pub graph: SimilarityGraph,
    pub shift: Arc<ShiftOperator>,
}

impl RecsysData {
    pub fn prepare(full: &RatingsTable, cfg: &RecsysConfig) -> Result<Self> {
        let table = select_top_items(full, cfg.top_items.min(full.items().len()))?;
        let graph = build_similarity(&table, cfg.top_k)?;
        let shift = Arc::new(item_shift(&graph)?);
        Ok(RecsysData {
            table,
            graph,
            shift,
        })
    }

    pub fn samples(
        &self,
        target_item: u32,
        split: f64,
        seed: u64,
    ) -> Result<(Vec<RecSample>, Vec<RecSample>)> {
        make_samples(&self.table, &self.graph, target_item, split, seed)
    }
}

#[derive(Clone, Debug)]
pub struct RecsysRun {
    pub kind: RecModelKind,
    pub seed: u64,
    pub target_item: u32,
    pub model: Model,
    pub history: Vec<BatchRecord>,
    pub train_rmse: f64,
    pub test_rmse: f64,
}

/// Train one model on `cfg.target_item` and report train and test RMSE.
pub fn train_recommender(
    data: &RecsysData,
    kind: RecModelKind,
    cfg: &RecsysConfig,
    seed: u64,
    on_batch: impl FnMut(&BatchRecord),
) -> Result<RecsysRun> {
    let (train, test) = data.samples(cfg.target_item, cfg.split, seed)?;
    if train.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no training users rated item {}",
            cfg.target_item
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut model = Model::init(cfg.model_spec(kind), Some(&data.shift), &mut rng)?;
    let train_samples: Vec<Sample> = train.iter().map(|s| s.to_sample(&data.shift)).collect();
    let history = optim::train(
        &mut model,
        &train_samples,
        LossKind::SmoothL1,
        &cfg.train_config(seed),
        on_batch,
    )?;
    let train_rmse = evaluate_rmse(&model, &data.shift, &train)?;
    let test_rmse = if test.is_empty() {
        f64::NAN
    } else {
        evaluate_rmse(&model, &data.shift, &test)?
    };
    Ok(RecsysRun {
        kind,
        seed,
        target_item: cfg.target_item,
        model,
        history,
        train_rmse,
        test_rmse,
    })
}

/// RMSE of a model trained for one item when read at another item's node,
/// over the test users of that item (same split seed, no retraining).
pub fn transfer_rmse(
    model: &Model,
    data: &RecsysData,
    item: u32,
    split: f64,
    seed: u64,
) -> Result<f64> {
    let (_, test) = data.samples(item, split, seed)?;
    evaluate_rmse(model, &data.shift, &test)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub seed: u64,
    pub target: u32,
    pub rmse: f64,
}

/// `model,seed,target,rmse`.
pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricRow]) -> std::io::Result<()> {
    writeln!(out, "model,seed,target,rmse")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.model, r.seed, r.target, r.rmse)?;
    }
    Ok(())
}
