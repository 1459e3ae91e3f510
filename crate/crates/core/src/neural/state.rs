//! Parameter containers. The same types hold gradients.

use std::sync::Arc;

use ndarray::{Array1, Array2, Array3, Array4, ArrayViewD, ArrayViewMutD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FilterFamily, LayerSpec, ModelSpec, Readout};
use crate::error::{Error, Result};
use crate::filters::{pole_margin, project_pole, ArmaParams, EdgeSupport};
use crate::graph::ShiftOperator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum LayerParams {
    /// taps `[F_out, F_in, K + 1]`
    Fir { taps: Array3<f64> },
    /// direct taps `[F_out, F_in, K + 1]`, residues and poles `[F_out, F_in, P]`
    Arma {
        direct: Array3<f64>,
        residues: Array3<f64>,
        poles: Array3<f64>,
    },
    /// `Φ^(0)` diagonals `[F_out, F_in, N]` and `Φ^(1..=K)` over the support
    /// coordinates `[F_out, F_in, K, M]`
    EdgeVarying {
        support: Arc<EdgeSupport>,
        phi0: Array3<f64>,
        phi: Array4<f64>,
    },
}

impl LayerParams {
    pub fn family(&self) -> FilterFamily {
        match self {
            LayerParams::Fir { .. } => FilterFamily::Fir,
            LayerParams::Arma { .. } => FilterFamily::Arma,
            LayerParams::EdgeVarying { .. } => FilterFamily::EdgeVarying,
        }
    }

    /// `(F_out, F_in)`.
    pub fn features(&self) -> (usize, usize) {
        let d = match self {
            LayerParams::Fir { taps } => taps.dim(),
            LayerParams::Arma { direct, .. } => direct.dim(),
            LayerParams::EdgeVarying { phi0, .. } => phi0.dim(),
        };
        (d.0, d.1)
    }

    fn zeros_like(&self) -> Self {
        match self {
            LayerParams::Fir { taps } => LayerParams::Fir {
                taps: Array3::zeros(taps.dim()),
            },
            LayerParams::Arma {
                direct,
                residues,
                poles,
            } => LayerParams::Arma {
                direct: Array3::zeros(direct.dim()),
                residues: Array3::zeros(residues.dim()),
                poles: Array3::zeros(poles.dim()),
            },
            LayerParams::EdgeVarying { support, phi0, phi } => LayerParams::EdgeVarying {
                support: support.clone(),
                phi0: Array3::zeros(phi0.dim()),
                phi: Array4::zeros(phi.dim()),
            },
        }
    }

    fn tensors(&self) -> Vec<(&'static str, ArrayViewD<'_, f64>)> {
        match self {
            LayerParams::Fir { taps } => vec![("taps", taps.view().into_dyn())],
            LayerParams::Arma {
                direct,
                residues,
                poles,
            } => vec![
                ("direct", direct.view().into_dyn()),
                ("residues", residues.view().into_dyn()),
                ("poles", poles.view().into_dyn()),
            ],
            LayerParams::EdgeVarying { phi0, phi, .. } => {
                vec![
                    ("phi0", phi0.view().into_dyn()),
                    ("phi", phi.view().into_dyn()),
                ]
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, ArrayViewMutD<'_, f64>)> {
        match self {
            LayerParams::Fir { taps } => vec![("taps", taps.view_mut().into_dyn())],
            LayerParams::Arma {
                direct,
                residues,
                poles,
            } => vec![
                ("direct", direct.view_mut().into_dyn()),
                ("residues", residues.view_mut().into_dyn()),
                ("poles", poles.view_mut().into_dyn()),
            ],
            LayerParams::EdgeVarying { phi0, phi, .. } => vec![
                ("phi0", phi0.view_mut().into_dyn()),
                ("phi", phi.view_mut().into_dyn()),
            ],
        }
    }

    /// Random initialization for one layer.
    pub fn init<R: Rng + ?Sized>(
        spec: &LayerSpec,
        shift: Option<&ShiftOperator>,
        rng: &mut R,
    ) -> Result<Self> {
        let (fo, fi, k) = (spec.out_features, spec.in_features, spec.order);
        let bound = 1.0 / ((fi * (k + 1)) as f64).sqrt();
        let need_shift = || {
            shift.ok_or_else(|| {
                Error::InvalidModel(format!(
                    "{} layers need a shift operator to initialize",
                    spec.family
                ))
            })
        };
        match spec.family {
            FilterFamily::Fir => {
                let mut taps =
                    Array3::from_shape_fn((fo, fi, k + 1), |_| rng.random_range(-bound..bound));
                if let Some(c) = spec.constraint()? {
                    for mut lane in taps.lanes_mut(ndarray::Axis(2)) {
                        let mut v = lane.to_vec();
                        c.enforce(&mut v);
                        lane.assign(&Array1::from(v));
                    }
                }
                Ok(LayerParams::Fir { taps })
            }
            FilterFamily::Arma => {
                let s = need_shift()?;
                let lambda_max = s.spectral_norm()?;
                let margin = pole_margin(s)?;
                let p = spec.poles;
                let mut direct = Array3::zeros((fo, fi, k + 1));
                let mut residues = Array3::zeros((fo, fi, p));
                let mut poles = Array3::zeros((fo, fi, p));
                for f in 0..fo {
                    for g in 0..fi {
                        let a = ArmaParams::random(rng, p, k, spec.jacobi_iters, lambda_max);
                        for (i, &v) in a.direct.iter().enumerate() {
                            direct[[f, g, i]] = v;
                        }
                        for i in 0..p {
                            residues[[f, g, i]] = a.residues[i];
                            poles[[f, g, i]] = project_pole(a.poles[i], s.diagonal(), margin);
                        }
                    }
                }
                Ok(LayerParams::Arma {
                    direct,
                    residues,
                    poles,
                })
            }
            FilterFamily::EdgeVarying => {
                let s = need_shift()?;
                let support = Arc::new(EdgeSupport::from_shift(s));
                let n = support.n_nodes();
                let max_row = (0..n)
                    .map(|i| support.row_range(i).len())
                    .max()
                    .unwrap_or(1);
                let edge_bound = 1.0 / (max_row as f64).sqrt();
                let phi0 = Array3::from_shape_fn((fo, fi, n), |_| rng.random_range(-bound..bound));
                let phi = Array4::from_shape_fn((fo, fi, k, support.len()), |_| {
                    rng.random_range(-edge_bound..edge_bound)
                });
                Ok(LayerParams::EdgeVarying { support, phi0, phi })
            }
        }
    }

    fn check_shape(&self, spec: &LayerSpec) -> Result<()> {
        let (fo, fi, k) = (spec.out_features, spec.in_features, spec.order);
        let ok = match self {
            LayerParams::Fir { taps } => {
                spec.family == FilterFamily::Fir && taps.dim() == (fo, fi, k + 1)
            }
            LayerParams::Arma {
                direct,
                residues,
                poles,
            } => {
                spec.family == FilterFamily::Arma
                    && direct.dim() == (fo, fi, k + 1)
                    && residues.dim() == (fo, fi, spec.poles)
                    && poles.dim() == (fo, fi, spec.poles)
            }
            LayerParams::EdgeVarying { support, phi0, phi } => {
                spec.family == FilterFamily::EdgeVarying
                    && phi0.dim() == (fo, fi, support.n_nodes())
                    && phi.dim() == (fo, fi, k, support.len())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "{} parameters do not match a {} layer with {fi} -> {fo} features and order {k}",
                self.family(),
                spec.family
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// `[out_dim, F_L]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub layers: Vec<LayerParams>,
    pub readout: Option<ReadoutParams>,
}

impl ModelState {
    pub fn init<R: Rng + ?Sized>(
        spec: &ModelSpec,
        shift: Option<&ShiftOperator>,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .map(|l| LayerParams::init(l, shift, rng))
            .collect::<Result<Vec<_>>>()?;
        let readout = match spec.readout {
            Readout::None => None,
            Readout::PerNodeLinear { out_dim } => {
                let fl = spec.layers.last().map_or(1, |l| l.out_features);
                let bound = 1.0 / (fl as f64).sqrt();
                Some(ReadoutParams {
                    weight: Array2::from_shape_fn((out_dim, fl), |_| {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(out_dim),
                })
            }
        };
        Ok(ModelState { layers, readout })
    }

    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::InvalidModel(format!(
                "{} parameter layers for {} spec layers",
                self.layers.len(),
                spec.layers.len()
            )));
        }
        for (l, (p, s)) in self.layers.iter().zip(&spec.layers).enumerate() {
            p.check_shape(s)
                .map_err(|e| Error::InvalidModel(format!("layer {l}: {e}")))?;
        }
        match (&self.readout, spec.readout) {
            (None, Readout::None) => {}
            (Some(r), Readout::PerNodeLinear { out_dim }) => {
                let fl = spec.layers.last().map_or(0, |l| l.out_features);
                if r.weight.dim() != (out_dim, fl) || r.bias.len() != out_dim {
                    return Err(Error::InvalidModel("readout shape mismatch".into()));
                }
            }
            _ => return Err(Error::InvalidModel("readout presence mismatch".into())),
        }
        self.check_finite()
    }

    pub fn zeros_like(&self) -> Self {
        ModelState {
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
            readout: self.readout.as_ref().map(|r| ReadoutParams {
                weight: Array2::zeros(r.weight.dim()),
                bias: Array1::zeros(r.bias.len()),
            }),
        }
    }

    /// Every tensor with its dotted path, in flattening order.
    pub fn named_tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.tensors() {
                out.push((format!("layers[{l}].{name}"), t));
            }
        }
        if let Some(r) = &self.readout {
            out.push(("readout.weight".into(), r.weight.view().into_dyn()));
            out.push(("readout.bias".into(), r.bias.view().into_dyn()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut().into_iter().map(|(_, t)| t));
        }
        if let Some(r) = &mut self.readout {
            out.push(r.weight.view_mut().into_dyn());
            out.push(r.bias.view_mut().into_dyn());
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (_, t) in self.named_tensors() {
            out.extend_from_slice(t.as_slice().expect("owned tensors are contiguous"));
        }
        out
    }

    pub fn unflatten(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.n_params()
            )));
        }
        let mut offset = 0;
        for mut t in self.tensors_mut() {
            let dst = t.as_slice_mut().expect("owned tensors are contiguous");
            dst.copy_from_slice(&values[offset..offset + dst.len()]);
            offset += dst.len();
        }
        Ok(())
    }

    /// Human-readable path of the flattened parameter at `index`, e.g.
    /// `layers[0].taps[1, 0, 2]`.
    pub fn param_path(&self, index: usize) -> String {
        let mut offset = 0;
        for (name, t) in self.named_tensors() {
            if index < offset + t.len() {
                let mut rem = index - offset;
                let mut idx = vec![0; t.ndim()];
                for (d, &len) in t.shape().iter().enumerate().rev() {
                    idx[d] = rem % len;
                    rem /= len;
                }
                let idx: Vec<String> = idx.iter().map(usize::to_string).collect();
                return format!("{name}[{}]", idx.join(", "));
            }
            offset += t.len();
        }
        format!("<out of range {index}>")
    }

    pub fn check_finite(&self) -> Result<()> {
        let mut offset = 0;
        for (_, t) in self.named_tensors() {
            let values = t.as_slice().expect("owned tensors are contiguous");
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(self.param_path(offset + i)));
            }
            offset += values.len();
        }
        Ok(())
    }

    /// Same tensor names and shapes.
    pub fn same_layout(&self, other: &ModelState) -> bool {
        let (a, b) = (self.named_tensors(), other.named_tensors());
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|((na, ta), (nb, tb))| na == nb && ta.shape() == tb.shape())
    }

    pub fn fill_zero(&mut self) {
        for mut t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// `out += self`, in flattening order.
    pub fn accumulate_into(&self, out: &mut [f64]) {
        let mut offset = 0;
        for (_, t) in self.named_tensors() {
            let values = t.as_slice().expect("owned tensors are contiguous");
            for (o, v) in out[offset..offset + values.len()].iter_mut().zip(values) {
                *o += v;
            }
            offset += values.len();
        }
    }

    /// `self += a · other`, elementwise. Both must share a layout.
    pub fn add_scaled(&mut self, a: f64, other: &ModelState) {
        let src = other.flatten();
        let mut offset = 0;
        for mut t in self.tensors_mut() {
            let dst = t.as_slice_mut().expect("owned tensors are contiguous");
            for (d, s) in dst.iter_mut().zip(&src[offset..]) {
                *d += a * s;
            }
            offset += dst.len();
        }
    }

    /// FNV-1a over the parameter bits in four interleaved lanes. Only used
    /// to catch stale tapes, so speed matters more than hash quality.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut lanes = [0xcbf2_9ce4_8422_2325_u64; 4];
        for (_, t) in self.named_tensors() {
            lanes[0] = (lanes[0] ^ t.len() as u64).wrapping_mul(PRIME);
            let values = t.as_slice().expect("owned tensors are contiguous");
            let mut chunks = values.chunks_exact(4);
            for c in &mut chunks {
                for (h, v) in lanes.iter_mut().zip(c) {
                    *h = (*h ^ v.to_bits()).wrapping_mul(PRIME);
                }
            }
            for v in chunks.remainder() {
                lanes[0] = (lanes[0] ^ v.to_bits()).wrapping_mul(PRIME);
            }
        }
        lanes
            .iter()
            .fold(0xcbf2_9ce4_8422_2325, |h, &l| (h ^ l).wrapping_mul(PRIME))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, ShiftKind};
    use crate::neural::{LayerSpec, Nonlinearity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> ModelSpec {
        ModelSpec {
            layers: vec![
                LayerSpec::fir(2, 3, 2, Nonlinearity::Relu),
                LayerSpec::arma(3, 2, 1, 2, 3, Nonlinearity::Tanh),
                LayerSpec::edge_varying(2, 2, 2, Nonlinearity::Identity),
            ],
            readout: Readout::PerNodeLinear { out_dim: 1 },
            shift_mode: Default::default(),
        }
    }

    #[test]
    fn flatten_round_trip_and_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = ShiftOperator::from_graph(&Graph::path(5).unwrap(), ShiftKind::Adjacency).unwrap();
        let st = ModelState::init(&spec(), Some(&s), &mut rng).unwrap();
        st.check_against(&spec()).unwrap();
        let flat = st.flatten();
        assert_eq!(flat.len(), st.n_params());
        let mut z = st.zeros_like();
        z.unflatten(&flat).unwrap();
        assert_eq!(z, st);
        assert_eq!(st.param_path(0), "layers[0].taps[0, 0, 0]");
        assert_eq!(st.param_path(4), "layers[0].taps[0, 1, 1]");
        assert_eq!(st.param_path(flat.len() - 1), "readout.bias[0]");
    }

    #[test]
    fn init_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = ShiftOperator::from_graph(&Graph::path(5).unwrap(), ShiftKind::Adjacency).unwrap();
        let st = ModelState::init(&spec(), Some(&s), &mut rng).unwrap();
        let LayerParams::Fir { taps } = &st.layers[0] else {
            panic!()
        };
        let b = 1.0 / 6f64.sqrt();
        assert!(taps.iter().all(|v| v.abs() < b));
        let LayerParams::Arma { poles, .. } = &st.layers[1] else {
            panic!()
        };
        let lm = s.spectral_norm().unwrap();
        assert!(poles
            .iter()
            .all(|g| g.abs() >= 1.5 * lm - 1e-12 && g.abs() <= 3.0 * lm + 1e-12));
        let r = st.readout.as_ref().unwrap();
        assert!(r.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_reports_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = ShiftOperator::from_graph(&Graph::path(5).unwrap(), ShiftKind::Adjacency).unwrap();
        let mut st = ModelState::init(&spec(), Some(&s), &mut rng).unwrap();
        st.readout.as_mut().unwrap().weight[[0, 1]] = f64::NAN;
        match st.check_finite() {
            Err(Error::NonFinite(p)) => assert_eq!(p, "readout.weight[0, 1]"),
            other => panic!("{other:?}"),
        }
    }
}
