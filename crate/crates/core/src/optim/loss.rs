use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `0.5 d²` for `|d| < 1`, `|d| - 0.5` otherwise
    SmoothL1,
    Mse,
    /// softmax over the features of each labeled node
    CrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::SmoothL1 => "smooth_l1",
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth_l1" => Ok(LossKind::SmoothL1),
            "mse" => Ok(LossKind::Mse),
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// What a prediction is compared against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// every entry of an `N × F` output
    Dense(Array2<f64>),
    /// selected `(node, feature, value)` entries only
    Entries(Vec<(usize, usize, f64)>),
    /// one class label per node; unlabeled nodes are skipped
    Labels(Vec<Option<usize>>),
}

pub fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.clamp(-1.0, 1.0))
    }
}

/// Mean loss over the compared entries and its gradient with respect to the
/// prediction.
pub fn loss_eval(
    kind: LossKind,
    pred: ArrayView2<f64>,
    target: &Target,
) -> Result<(f64, Array2<f64>)> {
    let mut grad = Array2::zeros(pred.dim());
    let pointwise = |d: f64| match kind {
        LossKind::SmoothL1 => smooth_l1(d),
        LossKind::Mse => (d * d, 2.0 * d),
        LossKind::CrossEntropy => unreachable!(),
    };
    match (kind, target) {
        (LossKind::CrossEntropy, Target::Labels(labels)) => {
            if labels.len() != pred.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    pred.nrows()
                )));
            }
            let count = labels.iter().flatten().count();
            if count == 0 {
                return Ok((0.0, grad));
            }
            let mut total = 0.0;
            for (i, label) in labels.iter().enumerate() {
                let Some(c) = *label else { continue };
                let row = pred.row(i);
                if c >= row.len() {
                    return Err(Error::InvalidArgument(format!(
                        "label {c} out of range at node {i}"
                    )));
                }
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
                total += z.ln() + max - row[c];
                for (j, &v) in row.iter().enumerate() {
                    let p = (v - max).exp() / z;
                    grad[[i, j]] = (p - if j == c { 1.0 } else { 0.0 }) / count as f64;
                }
            }
            Ok((total / count as f64, grad))
        }
        (LossKind::CrossEntropy, _) => Err(Error::InvalidArgument(
            "cross-entropy needs integer labels".into(),
        )),
        (_, Target::Labels(_)) => Err(Error::InvalidArgument(format!("{kind} needs real targets"))),
        (_, Target::Dense(y)) => {
            if y.dim() != pred.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "prediction {:?} vs target {:?}",
                    pred.dim(),
                    y.dim()
                )));
            }
            let n = y.len() as f64;
            let mut total = 0.0;
            for ((g, &p), &t) in grad.iter_mut().zip(pred.iter()).zip(y.iter()) {
                let (l, d) = pointwise(p - t);
                total += l;
                *g = d / n;
            }
            Ok((total / n, grad))
        }
        (_, Target::Entries(entries)) => {
            if entries.is_empty() {
                return Ok((0.0, grad));
            }
            let n = entries.len() as f64;
            let mut total = 0.0;
            for &(i, f, t) in entries {
                if i >= pred.nrows() || f >= pred.ncols() {
                    return Err(Error::DimensionMismatch(format!(
                        "target entry ({i}, {f}) outside a {:?} prediction",
                        pred.dim()
                    )));
                }
                let (l, d) = pointwise(pred[[i, f]] - t);
                total += l;
                grad[[i, f]] += d / n;
            }
            Ok((total / n, grad))
        }
    }
}
