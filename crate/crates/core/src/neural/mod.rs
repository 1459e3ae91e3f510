//! Graph perceptrons stacked into multi-feature GCNN, ARMANet and EdgeNet
//! models, with a per-node linear readout and reverse-mode gradients.

mod checkpoint;
mod model;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FirConstraint, FirVariant};

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT_VERSION};
pub use model::{equivariance_error, Model, Tape};
pub use state::{LayerParams, ModelState, ReadoutParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    Fir,
    Arma,
    EdgeVarying,
}

impl FilterFamily {
    pub fn name(self) -> &'static str {
        match self {
            FilterFamily::Fir => "fir",
            FilterFamily::Arma => "arma",
            FilterFamily::EdgeVarying => "edge_varying",
        }
    }
}

impl fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fir" => Ok(FilterFamily::Fir),
            "arma" => Ok(FilterFamily::Arma),
            "edge_varying" => Ok(FilterFamily::EdgeVarying),
            other => Err(Error::InvalidArgument(format!(
                "unknown filter family `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    Tanh,
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Nonlinearity::Relu => u.max(0.0),
            Nonlinearity::Tanh => u.tanh(),
            Nonlinearity::Identity => u,
        }
    }

    /// Derivative given the pre-activation `u` and the output `y = σ(u)`.
    /// The ReLU subgradient at 0 is 0.
    pub fn derivative(self, u: f64, y: f64) -> f64 {
        match self {
            Nonlinearity::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::Tanh => 1.0 - y * y,
            Nonlinearity::Identity => 1.0,
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Nonlinearity::Relu),
            "tanh" => Ok(Nonlinearity::Tanh),
            "identity" => Ok(Nonlinearity::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown nonlinearity `{other}`"
            ))),
        }
    }
}

/// One graph perceptron layer: a bank of `F_out × F_in` filters followed by
/// a pointwise nonlinearity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub family: FilterFamily,
    pub in_features: usize,
    pub out_features: usize,
    /// FIR order, ARMA direct-term order, or number of edge-varying shifts
    pub order: usize,
    /// ARMA poles P
    #[serde(default)]
    pub poles: usize,
    /// ARMA Jacobi iterations T
    #[serde(default = "default_jacobi_iters")]
    pub jacobi_iters: usize,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub fir_variant: Option<FirVariant>,
    #[serde(default)]
    pub gin_epsilon: f64,
}

fn default_jacobi_iters() -> usize {
    1
}

impl LayerSpec {
    pub fn fir(
        in_features: usize,
        out_features: usize,
        order: usize,
        nonlinearity: Nonlinearity,
    ) -> Self {
        LayerSpec {
            family: FilterFamily::Fir,
            in_features,
            out_features,
            order,
            poles: 0,
            jacobi_iters: 1,
            nonlinearity,
            fir_variant: None,
            gin_epsilon: 0.0,
        }
    }

    pub fn arma(
        in_features: usize,
        out_features: usize,
        order: usize,
        poles: usize,
        jacobi_iters: usize,
        nonlinearity: Nonlinearity,
    ) -> Self {
        LayerSpec {
            family: FilterFamily::Arma,
            poles,
            jacobi_iters,
            ..Self::fir(in_features, out_features, order, nonlinearity)
        }
    }

    pub fn edge_varying(
        in_features: usize,
        out_features: usize,
        order: usize,
        nonlinearity: Nonlinearity,
    ) -> Self {
        LayerSpec {
            family: FilterFamily::EdgeVarying,
            ..Self::fir(in_features, out_features, order, nonlinearity)
        }
    }

    pub fn with_variant(mut self, variant: FirVariant, epsilon: f64) -> Self {
        self.fir_variant = Some(variant);
        self.gin_epsilon = epsilon;
        self
    }

    pub fn constraint(&self) -> Result<Option<FirConstraint>> {
        match (self.family, self.fir_variant) {
            (_, None) | (_, Some(FirVariant::Plain)) => Ok(None),
            (FilterFamily::Fir, Some(v)) => {
                FirConstraint::new(v, self.order, self.gin_epsilon).map(Some)
            }
            (family, Some(v)) => Err(Error::InvalidModel(format!(
                "FIR variant {v} needs the fir family, layer is {family}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 || self.out_features == 0 {
            return Err(Error::InvalidModel(
                "feature counts must be positive".into(),
            ));
        }
        if self.family == FilterFamily::Arma && self.poles > 0 && self.jacobi_iters == 0 {
            return Err(Error::InvalidModel("ARMA layers need T >= 1".into()));
        }
        self.constraint()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Readout {
    None,
    /// Shared `F_L → out_dim` affine map applied at every node.
    PerNodeLinear {
        out_dim: usize,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    #[default]
    Static,
    /// Delayed FIR layers over a history of shift operators.
    TimeVarying,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub readout: Readout,
    #[serde(default)]
    pub shift_mode: ShiftMode,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidModel(
                "a model needs at least one layer".into(),
            ));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer
                .validate()
                .map_err(|e| Error::InvalidModel(format!("layer {l}: {e}")))?;
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_features != pair[1].in_features {
                return Err(Error::InvalidModel(format!(
                    "layer {l} outputs {} features but layer {} takes {}",
                    pair[0].out_features,
                    l + 1,
                    pair[1].in_features
                )));
            }
        }
        if let Readout::PerNodeLinear { out_dim: 0 } = self.readout {
            return Err(Error::InvalidModel("readout width must be positive".into()));
        }
        if self.shift_mode == ShiftMode::TimeVarying
            && self.layers.iter().any(|l| l.family != FilterFamily::Fir)
        {
            return Err(Error::InvalidModel(
                "time-varying shifts are only supported by FIR layers".into(),
            ));
        }
        Ok(())
    }

    pub fn in_features(&self) -> usize {
        self.layers[0].in_features
    }

    /// Features per node of the model output.
    pub fn out_features(&self) -> usize {
        match self.readout {
            Readout::None => self.layers.last().map_or(0, |l| l.out_features),
            Readout::PerNodeLinear { out_dim } => out_dim,
        }
    }

    /// Number of past signals a time-varying forward pass reads: `1 + Σ K_ℓ`.
    pub fn history_len(&self) -> usize {
        1 + self.layers.iter().map(|l| l.order).sum::<usize>()
    }
}
