//! JSON model checkpoints: spec, flattened tensors with explicit shapes,
//! edge-varying supports and shift metadata.

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::state::{LayerParams, ModelState, ReadoutParams};
use super::{FilterFamily, ModelSpec, Readout};
use crate::error::{Error, Result};
use crate::filters::EdgeSupport;
use crate::graph::ShiftKind;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: ModelSpec,
    #[serde(default)]
    pub shift_kind: Option<ShiftKind>,
    /// `(row, col)` coordinates of `I + S` per edge-varying layer
    #[serde(default)]
    pub supports: Vec<Option<SupportRecord>>,
    pub tensors: Vec<TensorRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportRecord {
    pub n_nodes: usize,
    pub coords: Vec<(usize, usize)>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, shift_kind: Option<ShiftKind>) -> Self {
        let tensors = model
            .state
            .named_tensors()
            .into_iter()
            .map(|(name, t)| TensorRecord {
                name,
                shape: t.shape().to_vec(),
                data: t.iter().copied().collect(),
            })
            .collect();
        let supports = model
            .state
            .layers
            .iter()
            .map(|l| match l {
                LayerParams::EdgeVarying { support, .. } => Some(SupportRecord {
                    n_nodes: support.n_nodes(),
                    coords: support.coords().collect(),
                }),
                _ => None,
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            spec: model.spec.clone(),
            shift_kind,
            supports,
            tensors,
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::InvalidModel(format!(
                "checkpoint format {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.spec.validate()?;
        let mut layers = Vec::with_capacity(self.spec.layers.len());
        for (l, spec) in self.spec.layers.iter().enumerate() {
            let (fo, fi, k) = (spec.out_features, spec.in_features, spec.order);
            layers.push(match spec.family {
                FilterFamily::Fir => LayerParams::Fir {
                    taps: Array3::zeros((fo, fi, k + 1)),
                },
                FilterFamily::Arma => LayerParams::Arma {
                    direct: Array3::zeros((fo, fi, k + 1)),
                    residues: Array3::zeros((fo, fi, spec.poles)),
                    poles: Array3::zeros((fo, fi, spec.poles)),
                },
                FilterFamily::EdgeVarying => {
                    let rec = self
                        .supports
                        .get(l)
                        .and_then(Option::as_ref)
                        .ok_or_else(|| {
                            Error::InvalidModel(format!("layer {l}: missing edge-varying support"))
                        })?;
                    let mut coords = rec.coords.clone();
                    coords.sort_unstable();
                    if coords
                        .iter()
                        .any(|&(i, j)| i >= rec.n_nodes || j >= rec.n_nodes)
                    {
                        return Err(Error::InvalidModel(format!(
                            "layer {l}: support out of range"
                        )));
                    }
                    let support = Arc::new(EdgeSupport::from_coords(rec.n_nodes, &coords));
                    LayerParams::EdgeVarying {
                        phi0: Array3::zeros((fo, fi, rec.n_nodes)),
                        phi: Array4::zeros((fo, fi, k, support.len())),
                        support,
                    }
                }
            });
        }
        let readout = match self.spec.readout {
            Readout::None => None,
            Readout::PerNodeLinear { out_dim } => {
                let fl = self.spec.layers.last().map_or(0, |l| l.out_features);
                Some(ReadoutParams {
                    weight: Array2::zeros((out_dim, fl)),
                    bias: Array1::zeros(out_dim),
                })
            }
        };
        let mut state = ModelState { layers, readout };
        let expected: Vec<(String, Vec<usize>)> = state
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::InvalidModel(format!(
                "checkpoint has {} tensors, model needs {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        let mut flat = Vec::with_capacity(state.n_params());
        for ((name, shape), rec) in expected.iter().zip(&self.tensors) {
            if &rec.name != name || &rec.shape != shape {
                return Err(Error::InvalidModel(format!(
                    "tensor {} {:?} does not match expected {name} {shape:?}",
                    rec.name, rec.shape
                )));
            }
            if rec.data.len() != shape.iter().product::<usize>() {
                return Err(Error::InvalidModel(format!(
                    "tensor {name} has the wrong length"
                )));
            }
            flat.extend_from_slice(&rec.data);
        }
        state.unflatten(&flat)?;
        Model::new(self.spec, state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Model {
    pub fn save(&self, path: &Path, shift_kind: Option<ShiftKind>) -> Result<()> {
        Checkpoint::from_model(self, shift_kind).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::load(path)?.into_model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, GraphSignal, ShiftOperator};
    use crate::neural::{LayerSpec, Nonlinearity, ShiftMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_reproduces_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = Graph::random(&mut rng, 7, 0.4, 0.5, 1.5);
        let s = ShiftOperator::from_graph(&g, ShiftKind::Adjacency)
            .unwrap()
            .eigendecompose()
            .unwrap();
        let spec = ModelSpec {
            layers: vec![
                LayerSpec::fir(2, 3, 2, Nonlinearity::Relu),
                LayerSpec::arma(3, 2, 1, 1, 2, Nonlinearity::Tanh),
                LayerSpec::edge_varying(2, 2, 2, Nonlinearity::Relu),
            ],
            readout: Readout::PerNodeLinear { out_dim: 1 },
            shift_mode: ShiftMode::Static,
        };
        let m = Model::init(spec, Some(&s), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path, Some(ShiftKind::Adjacency)).unwrap();
        let back = Model::load(&path).unwrap();
        let x = GraphSignal::random(&mut rng, 7, 2);
        let a = m.predict(&s, &x).unwrap();
        let b = back.predict(&s, &x).unwrap();
        assert!(a.distance(&b) <= 1e-12);
        let ck = Checkpoint::load(&path).unwrap();
        assert_eq!(ck.format_version, CHECKPOINT_FORMAT_VERSION);
        assert_eq!(ck.shift_kind, Some(ShiftKind::Adjacency));
    }

    #[test]
    fn rejects_wrong_version_and_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let spec = ModelSpec {
            layers: vec![LayerSpec::fir(1, 2, 1, Nonlinearity::Relu)],
            readout: Readout::None,
            shift_mode: ShiftMode::Static,
        };
        let m = Model::init(spec, None, &mut rng).unwrap();
        let mut ck = Checkpoint::from_model(&m, None);
        ck.format_version = 99;
        assert!(ck.clone().into_model().is_err());
        ck.format_version = CHECKPOINT_FORMAT_VERSION;
        ck.tensors[0].shape = vec![2, 1, 3];
        assert!(ck.into_model().is_err());
    }
}
