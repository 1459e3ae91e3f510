//! Edge-varying graph filters: `Σ_k Φ^(k) ⋯ Φ^(0) x` with one weight per
//! node for `Φ^(0)` and one weight per stored coordinate of `I + S` for every
//! later `Φ^(k)`.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftOperator};

/// Row-sorted coordinate list of `I + S`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSupport {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl EdgeSupport {
    pub fn from_shift(s: &ShiftOperator) -> Self {
        let coords = s.support_with_identity();
        Self::from_coords(s.n_nodes(), &coords)
    }

    /// `coords` must be sorted by `(row, col)`.
    pub fn from_coords(n: usize, coords: &[(usize, usize)]) -> Self {
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(coords.len());
        for &(i, j) in coords {
            row_ptr[i + 1] += 1;
            cols.push(j);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        EdgeSupport { n, row_ptr, cols }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col(&self, p: usize) -> usize {
        self.cols[p]
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.cols[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|p| r.start + p)
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.row_range(i).map(move |p| (i, self.cols[p])))
    }

    /// `out = Φ z` where `phi` holds one value per stored coordinate.
    pub fn apply_into(&self, phi: &[f64], z: ArrayView2<f64>, mut out: ArrayViewMut2<f64>) {
        if let (Some(zs), Some(os)) = (z.as_slice(), out.as_slice_mut()) {
            if z.ncols() == 1 {
                for (i, o) in os.iter_mut().enumerate() {
                    let r = self.row_range(i);
                    *o = phi[r.clone()]
                        .iter()
                        .zip(&self.cols[r])
                        .map(|(w, &j)| w * zs[j])
                        .sum();
                }
                return;
            }
        }
        let f = z.ncols();
        for i in 0..self.n {
            for c in 0..f {
                let mut acc = 0.0;
                for p in self.row_range(i) {
                    acc += phi[p] * z[[self.cols[p], c]];
                }
                out[[i, c]] = acc;
            }
        }
    }

    /// `out = Φᵀ z`.
    pub fn apply_transpose_into(
        &self,
        phi: &[f64],
        z: ArrayView2<f64>,
        mut out: ArrayViewMut2<f64>,
    ) {
        out.fill(0.0);
        if let (Some(zs), Some(os)) = (z.as_slice(), out.as_slice_mut()) {
            if z.ncols() == 1 {
                for (i, &zi) in zs.iter().enumerate() {
                    for p in self.row_range(i) {
                        os[self.cols[p]] += phi[p] * zi;
                    }
                }
                return;
            }
        }
        let f = z.ncols();
        for i in 0..self.n {
            for p in self.row_range(i) {
                let j = self.cols[p];
                for c in 0..f {
                    out[[j, c]] += phi[p] * z[[i, c]];
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeVaryingParams {
    pub support: Arc<EdgeSupport>,
    /// diagonal of Φ^(0)
    pub phi0: Vec<f64>,
    /// Φ^(1..=K), each over the support coordinates
    pub phi: Vec<Vec<f64>>,
}

impl EdgeVaryingParams {
    pub fn zeros(support: Arc<EdgeSupport>, order: usize) -> Self {
        let n = support.n_nodes();
        let m = support.len();
        EdgeVaryingParams {
            support,
            phi0: vec![0.0; n],
            phi: vec![vec![0.0; m]; order],
        }
    }

    /// From dense matrices `[Φ^(0), ..., Φ^(K)]`, rejecting entries outside
    /// the allowed support.
    pub fn from_matrices(support: Arc<EdgeSupport>, mats: &[Array2<f64>]) -> Result<Self> {
        let n = support.n_nodes();
        if mats.is_empty() {
            return Err(Error::InvalidFilter(
                "edge-varying filter needs Φ^(0)".into(),
            ));
        }
        for m in mats {
            if m.dim() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "Φ is {:?}, expected {n}x{n}",
                    m.dim()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("edge-varying parameters".into()));
            }
        }
        let mut out = Self::zeros(support.clone(), mats.len() - 1);
        for ((i, j), &v) in mats[0].indexed_iter() {
            if i == j {
                out.phi0[i] = v;
            } else if v != 0.0 {
                return Err(Error::SupportViolation(i, j));
            }
        }
        for (k, m) in mats[1..].iter().enumerate() {
            for ((i, j), &v) in m.indexed_iter() {
                match support.index_of(i, j) {
                    Some(p) => out.phi[k][p] = v,
                    None if v != 0.0 => return Err(Error::SupportViolation(i, j)),
                    None => {}
                }
            }
        }
        Ok(out)
    }

    /// Nested construction `Φ^(0) = h_0 I`, `Φ^(k) = (h_k / h_{k-1}) S`, so
    /// that `Φ^(k:0) = h_k S^k`.
    pub fn from_fir(taps: &[f64], s: &ShiftOperator) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidFilter(
                "FIR filter needs at least one tap".into(),
            ));
        }
        let support = Arc::new(EdgeSupport::from_shift(s));
        let mut out = Self::zeros(support.clone(), taps.len() - 1);
        out.phi0.iter_mut().for_each(|v| *v = taps[0]);
        for k in 1..taps.len() {
            let ratio = if taps[k - 1] != 0.0 {
                taps[k] / taps[k - 1]
            } else if taps[k..].iter().all(|&t| t == 0.0) {
                0.0
            } else {
                return Err(Error::InvalidFilter(format!(
                    "tap {} is zero but a later tap is not; no nested edge-varying form",
                    k - 1
                )));
            };
            for (i, j, v) in s.entries() {
                let p = support.index_of(i, j).expect("support covers S");
                out.phi[k - 1][p] = ratio * v;
            }
        }
        Ok(out)
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.support.n_nodes()
    }

    /// `N + K · |supp(I + S)|`.
    pub fn param_count(&self) -> usize {
        self.phi0.len() + self.phi.iter().map(Vec::len).sum::<usize>()
    }

    pub fn to_matrices(&self) -> Vec<Array2<f64>> {
        let n = self.n_nodes();
        let mut mats = vec![Array2::from_diag(&ndarray::Array1::from(self.phi0.clone()))];
        for phi in &self.phi {
            let mut m = Array2::zeros((n, n));
            for (p, (i, j)) in self.support.coords().enumerate() {
                m[[i, j]] = phi[p];
            }
            mats.push(m);
        }
        mats
    }

    pub fn apply(&self, x: &GraphSignal) -> Result<GraphSignal> {
        edge_varying_apply(self, x)
    }
}

/// `Σ_k z^(k)` with `z^(k) = Φ^(k) z^(k-1)` and `z^(-1) = x`.
pub fn edge_varying_apply(e: &EdgeVaryingParams, x: &GraphSignal) -> Result<GraphSignal> {
    if x.n_nodes() != e.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} nodes, filter has {}",
            x.n_nodes(),
            e.n_nodes()
        )));
    }
    let mut z = x.0.clone();
    for (mut row, &w) in z.rows_mut().into_iter().zip(&e.phi0) {
        row.mapv_inplace(|v| w * v);
    }
    let mut out = z.clone();
    let mut next = Array2::zeros(z.dim());
    for phi in &e.phi {
        e.support.apply_into(phi, z.view(), next.view_mut());
        std::mem::swap(&mut z, &mut next);
        out += &z;
    }
    Ok(GraphSignal(out))
}
