//! FIR graph convolutions `Σ_k h_k S^k x` and the constrained tap layouts
//! used by GCN, SGC and GIN style layers.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Zip};
use serde::{Deserialize, Serialize};

use super::FrequencySample;
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftOperator};

/// Filter taps `[h_0, ..., h_K]` with an optional trainability mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirTaps {
    pub taps: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl FirTaps {
    pub fn new(taps: Vec<f64>) -> Self {
        FirTaps { taps, mask: None }
    }

    /// Filter order K.
    pub fn order(&self) -> usize {
        self.taps.len().saturating_sub(1)
    }

    pub fn is_trainable(&self, k: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[k])
    }

    pub fn apply(&self, s: &ShiftOperator, x: &GraphSignal) -> Result<GraphSignal> {
        fir_apply(self, s, x)
    }

    /// `h(λ) = Σ_k h_k λ^k` by Horner's rule.
    pub fn eval(&self, lambda: f64) -> f64 {
        self.taps.iter().rev().fold(0.0, |acc, &h| acc * lambda + h)
    }

    /// `h'(λ)`.
    pub fn derivative(&self, lambda: f64) -> f64 {
        self.taps
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &h)| acc * lambda + k as f64 * h)
    }
}

impl From<Vec<f64>> for FirTaps {
    fn from(taps: Vec<f64>) -> Self {
        FirTaps::new(taps)
    }
}

/// `Σ_k h_k S^k x`, by repeated sparse shifts.
pub fn fir_apply(h: &FirTaps, s: &ShiftOperator, x: &GraphSignal) -> Result<GraphSignal> {
    s.check_nodes(x.n_nodes())?;
    if h.taps.is_empty() {
        return Err(Error::InvalidFilter(
            "FIR filter needs at least one tap".into(),
        ));
    }
    let mut out = Array2::zeros(x.0.dim());
    fir_accumulate(&h.taps, s, x.view(), out.view_mut());
    Ok(GraphSignal(out))
}

/// `out += Σ_k taps[k] S^k x`. Shared by every filter that carries a direct
/// FIR term so those paths agree bit for bit.
pub(crate) fn fir_accumulate(
    taps: &[f64],
    s: &ShiftOperator,
    x: ArrayView2<f64>,
    mut out: ArrayViewMut2<f64>,
) {
    if taps.is_empty() {
        return;
    }
    Zip::from(&mut out)
        .and(&x)
        .for_each(|o, &xv| *o += taps[0] * xv);
    let mut cur = x.to_owned();
    let mut next = Array2::zeros(x.dim());
    for &hk in &taps[1..] {
        s.shift_into(cur.view(), next.view_mut());
        std::mem::swap(&mut cur, &mut next);
        Zip::from(&mut out).and(&cur).for_each(|o, &z| *o += hk * z);
    }
}

/// Frequency response sampled at each λ.
pub fn fir_response(h: &FirTaps, lambdas: &[f64]) -> Vec<FrequencySample> {
    lambdas
        .iter()
        .map(|&lambda| FrequencySample {
            lambda,
            response: h.eval(lambda),
        })
        .collect()
}

/// Tap layouts that restrict the plain FIR filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirVariant {
    /// every tap trainable
    Plain,
    /// K = 1, h_0 fixed at 0
    Gcn,
    /// only h_K trainable
    Sgc,
    /// K = 1, h_0 tied to (1 + ε) h_1
    Gin,
}

impl FirVariant {
    pub fn name(self) -> &'static str {
        match self {
            FirVariant::Plain => "plain",
            FirVariant::Gcn => "gcn",
            FirVariant::Sgc => "sgc",
            FirVariant::Gin => "gin",
        }
    }
}

impl fmt::Display for FirVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FirVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(FirVariant::Plain),
            "gcn" => Ok(FirVariant::Gcn),
            "sgc" => Ok(FirVariant::Sgc),
            "gin" => Ok(FirVariant::Gin),
            other => Err(Error::InvalidArgument(format!(
                "unknown FIR variant `{other}`"
            ))),
        }
    }
}

/// A tap-layout constraint: which taps train, which are pinned, which are
/// tied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirConstraint {
    pub variant: FirVariant,
    pub order: usize,
    pub epsilon: f64,
}

impl FirConstraint {
    pub fn new(variant: FirVariant, order: usize, epsilon: f64) -> Result<Self> {
        match variant {
            FirVariant::Gcn | FirVariant::Gin if order != 1 => Err(Error::InvalidFilter(format!(
                "{variant} filters have K = 1, got K = {order}"
            ))),
            FirVariant::Sgc if order < 1 => {
                Err(Error::InvalidFilter("sgc filters need K >= 1".into()))
            }
            FirVariant::Gin if !epsilon.is_finite() => {
                Err(Error::InvalidFilter("gin epsilon must be finite".into()))
            }
            _ => Ok(FirConstraint {
                variant,
                order,
                epsilon,
            }),
        }
    }

    pub fn trainable_mask(&self) -> Vec<bool> {
        let k = self.order;
        (0..=k)
            .map(|i| match self.variant {
                FirVariant::Plain => true,
                FirVariant::Gcn | FirVariant::Gin => i == 1,
                FirVariant::Sgc => i == k,
            })
            .collect()
    }

    /// Pin fixed taps to 0 and re-impose the GIN tie on a tap vector.
    pub fn enforce(&self, taps: &mut [f64]) {
        match self.variant {
            FirVariant::Plain => {}
            FirVariant::Gcn => taps[0] = 0.0,
            FirVariant::Sgc => {
                let k = self.order;
                taps[..k].iter_mut().for_each(|t| *t = 0.0);
            }
            FirVariant::Gin => taps[0] = (1.0 + self.epsilon) * taps[1],
        }
    }

    /// Turn a gradient over all taps into a gradient over the free
    /// parameters: pinned taps get 0, and the tied tap's gradient is folded
    /// into h_1 by the chain rule.
    pub fn project_gradient(&self, grad: &mut [f64]) {
        match self.variant {
            FirVariant::Plain => {}
            FirVariant::Gcn => grad[0] = 0.0,
            FirVariant::Sgc => {
                let k = self.order;
                grad[..k].iter_mut().for_each(|g| *g = 0.0);
            }
            FirVariant::Gin => {
                grad[1] += (1.0 + self.epsilon) * grad[0];
                grad[0] = 0.0;
            }
        }
    }
}

/// Zero-initialized taps carrying the variant's mask.
pub fn fir_mask(variant: FirVariant, order: usize, epsilon: f64) -> Result<FirTaps> {
    let c = FirConstraint::new(variant, order, epsilon)?;
    Ok(FirTaps {
        taps: vec![0.0; order + 1],
        mask: Some(c.trainable_mask()),
    })
}
