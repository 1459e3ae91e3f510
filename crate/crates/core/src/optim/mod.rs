//! Losses, ADAM and the mini-batch training loop.

mod adam;
mod loss;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftOperator};
use crate::neural::{Model, ModelState, ShiftMode, Tape};

pub use adam::{adam_step, AdamState};
pub use loss::{loss_eval, smooth_l1, LossKind, Target};

/// One training pair. Static models read `shifts[0]` and `inputs[0]`;
/// time-varying models read both as newest-first histories.
#[derive(Clone, Debug)]
pub struct Sample {
    pub shifts: Vec<Arc<ShiftOperator>>,
    pub inputs: Vec<GraphSignal>,
    pub target: Target,
}

impl Sample {
    pub fn new_static(shift: Arc<ShiftOperator>, input: GraphSignal, target: Target) -> Self {
        Sample {
            shifts: vec![shift],
            inputs: vec![input],
            target,
        }
    }

    pub fn forward<'s>(&'s self, model: &Model) -> Result<(GraphSignal, Tape<'s>)> {
        match model.spec.shift_mode {
            ShiftMode::Static => {
                let s = self.shifts.first().ok_or_else(|| {
                    Error::InvalidArgument("sample without a shift operator".into())
                })?;
                let x = self
                    .inputs
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("sample without an input".into()))?;
                model.forward(s, x)
            }
            ShiftMode::TimeVarying => {
                let refs: Vec<&ShiftOperator> = self.shifts.iter().map(|s| s.as_ref()).collect();
                model.forward_history(&refs, &self.inputs)
            }
        }
    }

    pub fn predict(&self, model: &Model) -> Result<GraphSignal> {
        self.forward(model).map(|(y, _)| y)
    }

    /// Loss and flattened parameter gradient for this sample.
    pub fn loss_and_grad(&self, model: &Model, loss: LossKind) -> Result<(f64, Vec<f64>)> {
        let mut grads = model.state.zeros_like();
        let l = self.loss_and_grad_into(model, loss, &mut grads)?;
        Ok((l, grads.flatten()))
    }

    /// Loss, with the parameter gradient written into `grads`.
    pub fn loss_and_grad_into(
        &self,
        model: &Model,
        loss: LossKind,
        grads: &mut ModelState,
    ) -> Result<f64> {
        let (y, tape) = self.forward(model)?;
        let (l, g) = loss_eval(loss, y.view(), &self.target)?;
        model.backward_into(&tape, &GraphSignal(g), grads)?;
        Ok(l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_shuffle() -> bool {
    true
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument(
                "ADAM betas must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

/// Mean loss and mean gradient over a set of samples. Per-sample work may
/// run in parallel; the reduction is sequential in sample order.
pub fn batch_gradient(
    model: &Model,
    samples: &[&Sample],
    loss: LossKind,
) -> Result<(f64, Vec<f64>)> {
    let mut ws = GradientWorkspace::default();
    let mut grad = Vec::new();
    let l = ws.batch_gradient(model, samples, loss, &mut grad)?;
    Ok((l, grad))
}

/// Per-sample gradient buffers kept alive across steps, so that large models
/// do not pay for fresh allocations on every sample.
#[derive(Default)]
pub struct GradientWorkspace {
    buffers: Vec<ModelState>,
}

impl GradientWorkspace {
    /// Mean loss over `samples`; the mean gradient is written to `grad`.
    pub fn batch_gradient(
        &mut self,
        model: &Model,
        samples: &[&Sample],
        loss: LossKind,
        grad: &mut Vec<f64>,
    ) -> Result<f64> {
        if self
            .buffers
            .first()
            .is_some_and(|b| !b.same_layout(&model.state))
        {
            self.buffers.clear();
        }
        while self.buffers.len() < samples.len() {
            self.buffers.push(model.state.zeros_like());
        }
        let losses: Vec<Result<f64>> = samples
            .par_iter()
            .zip(self.buffers.par_iter_mut())
            .map(|(s, buf)| s.loss_and_grad_into(model, loss, buf))
            .collect();
        grad.clear();
        grad.resize(model.state.n_params(), 0.0);
        let mut total = 0.0;
        for (l, buf) in losses.into_iter().zip(&self.buffers) {
            total += l?;
            buf.accumulate_into(grad);
        }
        let n = samples.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(total / n)
    }
}

/// Mini-batch ADAM over `epochs × ⌈|data| / batch⌉` steps. FIR constraints
/// and ARMA pole projection (against the first sample's shift) are applied
/// after every step. `on_batch` sees every logged batch.
pub fn train(
    model: &mut Model,
    data: &[Sample],
    loss: LossKind,
    cfg: &TrainConfig,
    mut on_batch: impl FnMut(&BatchRecord),
) -> Result<Vec<BatchRecord>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let pole_shift = data[0].shifts.first().cloned();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(
        model.state.n_params(),
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
    );
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs * data.len().div_ceil(cfg.batch_size));
    let mut ws = GradientWorkspace::default();
    let mut grad = Vec::new();
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let samples: Vec<&Sample> = idx.iter().map(|&i| &data[i]).collect();
            let l = ws.batch_gradient(model, &samples, loss, &mut grad)?;
            let mut flat = model.state.flatten();
            adam.update(&mut flat, &grad).map_err(|i| {
                Error::NonFinite(format!(
                    "gradient of {} (epoch {epoch}, batch {batch})",
                    model.state.param_path(i)
                ))
            })?;
            model.state.unflatten(&flat)?;
            model.enforce_constraints(pole_shift.as_deref())?;
            model.state.check_finite()?;
            let rec = BatchRecord {
                epoch,
                batch,
                loss: l,
            };
            on_batch(&rec);
            history.push(rec);
        }
    }
    Ok(history)
}

/// Mean loss over `data`.
pub fn evaluate(model: &Model, data: &[Sample], loss: LossKind) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let losses: Vec<Result<f64>> = data
        .par_iter()
        .map(|s| {
            let y = s.predict(model)?;
            loss_eval(loss, y.view(), &s.target).map(|(l, _)| l)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / data.len() as f64)
}

/// `epoch,batch,loss` CSV.
pub fn write_training_log<W: std::io::Write>(
    mut out: W,
    history: &[BatchRecord],
) -> std::io::Result<()> {
    writeln!(out, "epoch,batch,loss")?;
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.batch, r.loss)?;
    }
    Ok(())
}
