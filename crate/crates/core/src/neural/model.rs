//! Forward and reverse passes.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis, Zip};

use super::state::{LayerParams, ModelState, ReadoutParams};
use super::{LayerSpec, ModelSpec, Nonlinearity, ShiftMode};
use crate::error::{Error, Result};
use crate::filters::arma::{jacobi_shift_with_margin, JacobiShift};
use crate::filters::{pole_margin, project_pole, EdgeSupport};
use crate::graph::{GraphSignal, Permutation, ShiftOperator};

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub state: ModelState,
}

/// Intermediate signals recorded by a forward pass.
#[derive(Debug)]
pub struct Tape<'s> {
    shifts: Vec<&'s ShiftOperator>,
    fingerprint: u64,
    n_nodes: usize,
    layers: Vec<LayerTape>,
    /// last-layer output fed to the readout
    readout_input: Array2<f64>,
}

impl Tape<'_> {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
}

#[derive(Debug)]
enum LayerTape {
    Fir {
        /// `S^k x`, k = 0..=K
        z: Vec<Array2<f64>>,
        u: Array2<f64>,
        y: Array2<f64>,
    },
    Arma {
        z: Vec<Array2<f64>>,
        /// Jacobi iterates `u_0..=u_T` per `[f][g][p]`
        iterates: Vec<Vec<Vec<Vec<Array2<f64>>>>>,
        u: Array2<f64>,
        y: Array2<f64>,
    },
    EdgeVarying {
        x: Array2<f64>,
        /// `z^(0..=K)` per `[f][g]`
        z: Vec<Vec<Vec<Array2<f64>>>>,
        u: Array2<f64>,
        y: Array2<f64>,
    },
    Delayed {
        /// `z[k][j] = S(j) ⋯ S(j+k-1) x(j+k)`
        z: Vec<Vec<Array2<f64>>>,
        u: Vec<Array2<f64>>,
        y: Vec<Array2<f64>>,
    },
}

impl Model {
    pub fn new(spec: ModelSpec, state: ModelState) -> Result<Self> {
        spec.validate()?;
        state.check_against(&spec)?;
        Ok(Model { spec, state })
    }

    pub fn init<R: rand::Rng + ?Sized>(
        spec: ModelSpec,
        shift: Option<&ShiftOperator>,
        rng: &mut R,
    ) -> Result<Self> {
        let state = ModelState::init(&spec, shift, rng)?;
        Ok(Model { spec, state })
    }

    /// Re-impose FIR tap constraints and keep ARMA poles at least the pole
    /// margin away from the diagonal of `shift`.
    pub fn enforce_constraints(&mut self, shift: Option<&ShiftOperator>) -> Result<()> {
        let mut margin = None;
        for (spec, params) in self.spec.layers.iter().zip(&mut self.state.layers) {
            match params {
                LayerParams::Fir { taps } => {
                    if let Some(c) = spec.constraint()? {
                        for mut lane in taps.lanes_mut(Axis(2)) {
                            let mut v = lane.to_vec();
                            c.enforce(&mut v);
                            lane.assign(&Array1::from(v));
                        }
                    }
                }
                LayerParams::Arma { poles, .. } => {
                    let Some(s) = shift else { continue };
                    let m = match margin {
                        Some(m) => m,
                        None => *margin.insert(pole_margin(s)?),
                    };
                    poles.mapv_inplace(|g| project_pole(g, s.diagonal(), m));
                }
                LayerParams::EdgeVarying { .. } => {}
            }
        }
        Ok(())
    }

    /// Static forward pass `x_ℓ = σ(Σ_g H_ℓ^{fg}(S) x_{ℓ-1}^g)` and readout.
    pub fn forward<'s>(
        &self,
        s: &'s ShiftOperator,
        x: &GraphSignal,
    ) -> Result<(GraphSignal, Tape<'s>)> {
        if self.spec.shift_mode != ShiftMode::Static {
            return Err(Error::InvalidModel(
                "time-varying model needs a shift history".into(),
            ));
        }
        s.check_nodes(x.n_nodes())?;
        self.check_input(x)?;
        let mut h = x.0.clone();
        let mut layers = Vec::with_capacity(self.spec.layers.len());
        for (spec, params) in self.spec.layers.iter().zip(&self.state.layers) {
            let tape = layer_forward(spec, params, s, h)?;
            h = tape.output().clone();
            layers.push(tape);
        }
        let out = readout_forward(self.state.readout.as_ref(), &h);
        Ok((
            GraphSignal(out),
            Tape {
                shifts: vec![s],
                fingerprint: self.state.fingerprint(),
                n_nodes: x.n_nodes(),
                layers,
                readout_input: h,
            },
        ))
    }

    /// Time-varying forward pass with delayed FIR layers. Histories are
    /// newest first; the output is the readout at the newest time. Missing
    /// history is treated as zero.
    pub fn forward_history<'s>(
        &self,
        shifts: &[&'s ShiftOperator],
        signals: &[GraphSignal],
    ) -> Result<(GraphSignal, Tape<'s>)> {
        if self.spec.shift_mode != ShiftMode::TimeVarying {
            return Err(Error::InvalidModel(
                "static model takes a single shift".into(),
            ));
        }
        let first = signals
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty signal history".into()))?;
        let n = first.n_nodes();
        for x in signals {
            if x.n_nodes() != n {
                return Err(Error::DimensionMismatch(
                    "signal history mixes node counts".into(),
                ));
            }
            self.check_input(x)?;
        }
        for s in shifts {
            s.check_nodes(n)?;
        }
        let avail = signals.len().min(self.spec.history_len());
        let mut h: Vec<Array2<f64>> = signals[..avail].iter().map(|x| x.0.clone()).collect();
        let mut remaining: usize = self.spec.layers.iter().map(|l| l.order).sum();
        let mut layers = Vec::with_capacity(self.spec.layers.len());
        for (spec, params) in self.spec.layers.iter().zip(&self.state.layers) {
            remaining -= spec.order;
            let LayerParams::Fir { taps } = params else {
                unreachable!("validated: time-varying layers are FIR")
            };
            let out_len = (1 + remaining).min(h.len());
            let tape = delayed_forward(taps, spec.nonlinearity, shifts, h, out_len)?;
            let LayerTape::Delayed { y, .. } = &tape else {
                unreachable!()
            };
            h = y.clone();
            layers.push(tape);
        }
        let last = h.swap_remove(0);
        let out = readout_forward(self.state.readout.as_ref(), &last);
        Ok((
            GraphSignal(out),
            Tape {
                shifts: shifts.to_vec(),
                fingerprint: self.state.fingerprint(),
                n_nodes: n,
                layers,
                readout_input: last,
            },
        ))
    }

    /// Output only.
    pub fn predict(&self, s: &ShiftOperator, x: &GraphSignal) -> Result<GraphSignal> {
        self.forward(s, x).map(|(y, _)| y)
    }

    /// Gradients of `⟨grad_out, output⟩` with respect to every parameter.
    /// Pinned FIR taps get zero gradient; tied taps are folded into their
    /// free parameter.
    pub fn backward(&self, tape: &Tape<'_>, grad_out: &GraphSignal) -> Result<ModelState> {
        let mut grads = self.state.zeros_like();
        self.backward_into(tape, grad_out, &mut grads)?;
        Ok(grads)
    }

    /// [`Model::backward`] into a caller-owned buffer with the model's
    /// layout. The buffer is overwritten, not accumulated into.
    pub fn backward_into(
        &self,
        tape: &Tape<'_>,
        grad_out: &GraphSignal,
        grads: &mut ModelState,
    ) -> Result<()> {
        if !grads.same_layout(&self.state) {
            return Err(Error::DimensionMismatch(
                "gradient buffer does not match the model's parameters".into(),
            ));
        }
        if tape.fingerprint != self.state.fingerprint() {
            return Err(Error::StaleTape(
                "parameters changed since the forward pass".into(),
            ));
        }
        if tape.layers.len() != self.spec.layers.len() {
            return Err(Error::StaleTape("tape recorded a different model".into()));
        }
        let expect = (tape.n_nodes, self.spec.out_features());
        if grad_out.0.dim() != expect {
            return Err(Error::DimensionMismatch(format!(
                "output gradient is {:?}, expected {expect:?}",
                grad_out.0.dim()
            )));
        }
        grads.fill_zero();
        let mut delta = match (&self.state.readout, &mut grads.readout) {
            (Some(r), Some(gr)) => readout_backward(r, gr, &tape.readout_input, &grad_out.0),
            _ => grad_out.0.clone(),
        };
        match self.spec.shift_mode {
            ShiftMode::Static => {
                let s = tape.shifts[0];
                for l in (0..self.spec.layers.len()).rev() {
                    delta = layer_backward(
                        &self.spec.layers[l],
                        &self.state.layers[l],
                        &mut grads.layers[l],
                        &tape.layers[l],
                        s,
                        delta,
                    );
                }
            }
            ShiftMode::TimeVarying => {
                let mut deltas = vec![delta];
                for l in (0..self.spec.layers.len()).rev() {
                    let LayerTape::Delayed { y, .. } = &tape.layers[l] else {
                        unreachable!()
                    };
                    deltas.resize_with(y.len(), || Array2::zeros(y[0].dim()));
                    let (LayerParams::Fir { taps }, LayerParams::Fir { taps: gtaps }) =
                        (&self.state.layers[l], &mut grads.layers[l])
                    else {
                        unreachable!()
                    };
                    deltas = delayed_backward(
                        taps,
                        gtaps,
                        self.spec.layers[l].nonlinearity,
                        &tape.layers[l],
                        &tape.shifts,
                        deltas,
                    );
                }
            }
        }
        for (spec, g) in self.spec.layers.iter().zip(&mut grads.layers) {
            if let (Some(c), LayerParams::Fir { taps }) = (spec.constraint()?, g) {
                for mut lane in taps.lanes_mut(Axis(2)) {
                    let mut v = lane.to_vec();
                    c.project_gradient(&mut v);
                    lane.assign(&Array1::from(v));
                }
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &GraphSignal) -> Result<()> {
        if x.n_features() != self.spec.in_features() {
            return Err(Error::DimensionMismatch(format!(
                "input has {} features, model takes {}",
                x.n_features(),
                self.spec.in_features()
            )));
        }
        Ok(())
    }
}

/// `‖Φ(Pᵀx; PᵀSP) − PᵀΦ(x; S)‖ / ‖Φ(x; S)‖` (absolute when the output is 0).
pub fn equivariance_error(
    model: &Model,
    s: &ShiftOperator,
    x: &GraphSignal,
    perm: &Permutation,
) -> Result<f64> {
    let y = model.predict(s, x)?;
    let sp = s.permuted(perm);
    let yp = model.predict(&sp, &x.permuted(perm))?;
    let err = yp.distance(&y.permuted(perm));
    let norm = y.norm();
    Ok(if norm > 0.0 { err / norm } else { err })
}

impl LayerTape {
    fn output(&self) -> &Array2<f64> {
        match self {
            LayerTape::Fir { y, .. }
            | LayerTape::Arma { y, .. }
            | LayerTape::EdgeVarying { y, .. } => y,
            LayerTape::Delayed { y, .. } => &y[0],
        }
    }
}

fn activate(sigma: Nonlinearity, u: &Array2<f64>) -> Array2<f64> {
    u.mapv(|v| sigma.apply(v))
}

/// `δU = δY ⊙ σ'(U)`.
fn activation_backward(
    sigma: Nonlinearity,
    u: &Array2<f64>,
    y: &Array2<f64>,
    dy: Array2<f64>,
) -> Array2<f64> {
    let mut du = dy;
    Zip::from(&mut du)
        .and(u)
        .and(y)
        .for_each(|d, &uv, &yv| *d *= sigma.derivative(uv, yv));
    du
}

/// `[x, Sx, ..., S^K x]`.
fn shift_powers(s: &ShiftOperator, x: Array2<f64>, order: usize) -> Vec<Array2<f64>> {
    let mut z = Vec::with_capacity(order + 1);
    z.push(x);
    for k in 1..=order {
        let mut next = Array2::zeros(z[k - 1].dim());
        s.shift_into(z[k - 1].view(), next.view_mut());
        z.push(next);
    }
    z
}

/// `u += Σ_k z_k H_kᵀ` with `H_k = taps[.., .., k]`.
fn mix_into(taps: &Array3<f64>, z: &[Array2<f64>], u: &mut Array2<f64>) {
    for (k, zk) in z.iter().enumerate() {
        let hk = taps.slice(s![.., .., k]);
        *u += &zk.dot(&hk.t());
    }
}

/// `Σ_k S^k (δU H_k)` by Horner's rule; valid because `S` is symmetric.
fn mix_backward(taps: &Array3<f64>, s: &ShiftOperator, du: &Array2<f64>) -> Array2<f64> {
    let order = taps.dim().2 - 1;
    let w = |k: usize| du.dot(&taps.slice(s![.., .., k]));
    let mut acc = w(order);
    let mut tmp = Array2::zeros(acc.dim());
    for k in (0..order).rev() {
        s.shift_into(acc.view(), tmp.view_mut());
        std::mem::swap(&mut acc, &mut tmp);
        acc += &w(k);
    }
    acc
}

/// `δH_k += δUᵀ z_k`.
fn mix_param_grad(gtaps: &mut Array3<f64>, z: &[Array2<f64>], du: &Array2<f64>) {
    for (k, zk) in z.iter().enumerate() {
        let mut gk = gtaps.slice_mut(s![.., .., k]);
        gk += &du.t().dot(zk);
    }
}

fn column(x: &Array2<f64>, g: usize) -> Array2<f64> {
    x.slice(s![.., g..g + 1]).to_owned()
}

fn layer_forward(
    spec: &LayerSpec,
    params: &LayerParams,
    s: &ShiftOperator,
    x: Array2<f64>,
) -> Result<LayerTape> {
    let n = x.nrows();
    match params {
        LayerParams::Fir { taps } => {
            let z = shift_powers(s, x, spec.order);
            let mut u = Array2::zeros((n, spec.out_features));
            mix_into(taps, &z, &mut u);
            let y = activate(spec.nonlinearity, &u);
            Ok(LayerTape::Fir { z, u, y })
        }
        LayerParams::Arma {
            direct,
            residues,
            poles,
        } => {
            let (fo, fi) = (spec.out_features, spec.in_features);
            let z = shift_powers(s, x, spec.order);
            let xs: Vec<Array2<f64>> = (0..fi).map(|g| column(&z[0], g)).collect();
            let mut u = Array2::zeros((n, fo));
            let mut iterates = Vec::with_capacity(fo);
            for f in 0..fo {
                let mut per_f = Vec::with_capacity(fi);
                for (g, xg) in xs.iter().enumerate() {
                    let mut pair = Array2::zeros((n, 1));
                    let mut per_g = Vec::with_capacity(spec.poles);
                    for p in 0..spec.poles {
                        let r = jacobi_operator(s, poles[[f, g, p]])?;
                        let us = jacobi_iterates(&r, residues[[f, g, p]], spec.jacobi_iters, xg);
                        pair += us.last().expect("T >= 1");
                        per_g.push(us);
                    }
                    for (k, zk) in z.iter().enumerate() {
                        let a = direct[[f, g, k]];
                        Zip::from(&mut pair)
                            .and(zk.slice(s![.., g..g + 1]))
                            .for_each(|o, &v| *o += a * v);
                    }
                    per_f.push(per_g);
                    let mut uf = u.slice_mut(s![.., f..f + 1]);
                    uf += &pair;
                }
                iterates.push(per_f);
            }
            let y = activate(spec.nonlinearity, &u);
            Ok(LayerTape::Arma { z, iterates, u, y })
        }
        LayerParams::EdgeVarying { support, phi0, phi } => {
            if support.n_nodes() != n {
                return Err(Error::DimensionMismatch(format!(
                    "edge-varying layer is bound to {} nodes, signal has {n}",
                    support.n_nodes()
                )));
            }
            let (fo, fi) = (spec.out_features, spec.in_features);
            let mut u = Array2::zeros((n, fo));
            let mut zs = Vec::with_capacity(fo);
            for f in 0..fo {
                let mut per_f = Vec::with_capacity(fi);
                for g in 0..fi {
                    let zfg = edge_chain(support, phi0, phi, f, g, x.slice(s![.., g..g + 1]));
                    let mut pair = zfg[0].clone();
                    for zk in &zfg[1..] {
                        pair += zk;
                    }
                    let mut uf = u.slice_mut(s![.., f..f + 1]);
                    uf += &pair;
                    per_f.push(zfg);
                }
                zs.push(per_f);
            }
            let y = activate(spec.nonlinearity, &u);
            Ok(LayerTape::EdgeVarying { x, z: zs, u, y })
        }
    }
}

fn jacobi_operator(s: &ShiftOperator, gamma: f64) -> Result<JacobiShift<'_>> {
    let r = jacobi_shift_with_margin(s, gamma, 0.0)?;
    if r.inverse_diagonal().iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularPole(gamma));
    }
    Ok(r)
}

/// `u_0 = x`, `u_τ = β (D - γI)^{-1} x + R u_{τ-1}`; returns all iterates.
fn jacobi_iterates(
    r: &JacobiShift<'_>,
    beta: f64,
    iters: usize,
    x: &Array2<f64>,
) -> Vec<Array2<f64>> {
    let b = forcing(r, beta, x);
    let mut us = Vec::with_capacity(iters + 1);
    us.push(x.clone());
    for t in 1..=iters {
        let mut next = Array2::zeros(x.dim());
        r.apply_into(us[t - 1].view(), next.view_mut());
        next += &b;
        us.push(next);
    }
    us
}

fn forcing(r: &JacobiShift<'_>, beta: f64, x: &Array2<f64>) -> Array2<f64> {
    let mut b = x.clone();
    for (mut row, &inv) in b.rows_mut().into_iter().zip(r.inverse_diagonal()) {
        row.mapv_inplace(|v| beta * inv * v);
    }
    b
}

/// `z^(0) = Φ^(0) x`, `z^(k) = Φ^(k) z^(k-1)` for filter pair `(f, g)`.
fn edge_chain(
    support: &EdgeSupport,
    phi0: &Array3<f64>,
    phi: &ndarray::Array4<f64>,
    f: usize,
    g: usize,
    x: ArrayView2<f64>,
) -> Vec<Array2<f64>> {
    let order = phi.dim().2;
    let mut z0 = x.to_owned();
    for (mut row, &w) in z0.rows_mut().into_iter().zip(phi0.slice(s![f, g, ..])) {
        row.mapv_inplace(|v| w * v);
    }
    let mut zs = Vec::with_capacity(order + 1);
    zs.push(z0);
    for k in 0..order {
        let coeffs = phi.slice(s![f, g, k, ..]);
        let coeffs = coeffs.as_slice().expect("standard layout");
        let mut next = Array2::zeros(zs[k].dim());
        support.apply_into(coeffs, zs[k].view(), next.view_mut());
        zs.push(next);
    }
    zs
}

fn layer_backward(
    spec: &LayerSpec,
    params: &LayerParams,
    grads: &mut LayerParams,
    tape: &LayerTape,
    s: &ShiftOperator,
    dy: Array2<f64>,
) -> Array2<f64> {
    match (params, grads, tape) {
        (
            LayerParams::Fir { taps },
            LayerParams::Fir { taps: gtaps },
            LayerTape::Fir { z, u, y },
        ) => {
            let du = activation_backward(spec.nonlinearity, u, y, dy);
            mix_param_grad(gtaps, z, &du);
            mix_backward(taps, s, &du)
        }
        (
            LayerParams::Arma {
                direct,
                residues,
                poles,
            },
            LayerParams::Arma {
                direct: gdirect,
                residues: gres,
                poles: gpoles,
            },
            LayerTape::Arma { z, iterates, u, y },
        ) => {
            let du = activation_backward(spec.nonlinearity, u, y, dy);
            mix_param_grad(gdirect, z, &du);
            let mut dx = mix_backward(direct, s, &du);
            let n = du.nrows();
            for f in 0..spec.out_features {
                let dyf = column(&du, f);
                for g in 0..spec.in_features {
                    let xg = z[0].slice(s![.., g..g + 1]);
                    let mut dxg = Array2::zeros((n, 1));
                    for p in 0..spec.poles {
                        let gamma = poles[[f, g, p]];
                        let beta = residues[[f, g, p]];
                        let r = jacobi_operator(s, gamma).expect("checked in forward");
                        let inv = r.inverse_diagonal();
                        let us = &iterates[f][g][p];
                        let b = forcing(&r, beta, &us[0]);
                        let mut lambda = dyf.clone();
                        let mut sum_lambda = Array2::<f64>::zeros((n, 1));
                        let mut dgamma = 0.0;
                        let mut next = Array2::zeros((n, 1));
                        for t in (1..us.len()).rev() {
                            sum_lambda += &lambda;
                            // R u_{t-1} = u_t - b and dR/dγ = diag(inv) R
                            for i in 0..n {
                                dgamma += lambda[[i, 0]] * inv[i] * (us[t][[i, 0]] - b[[i, 0]]);
                            }
                            r.apply_transpose_into(lambda.view(), next.view_mut());
                            std::mem::swap(&mut lambda, &mut next);
                        }
                        let mut dbeta = 0.0;
                        for i in 0..n {
                            let w = sum_lambda[[i, 0]] * inv[i] * xg[[i, 0]];
                            dbeta += w;
                            dgamma += beta * inv[i] * w;
                            dxg[[i, 0]] += lambda[[i, 0]] + beta * inv[i] * sum_lambda[[i, 0]];
                        }
                        gres[[f, g, p]] += dbeta;
                        gpoles[[f, g, p]] += dgamma;
                    }
                    let mut col = dx.slice_mut(s![.., g..g + 1]);
                    col += &dxg;
                }
            }
            dx
        }
        (
            LayerParams::EdgeVarying { support, phi0, phi },
            LayerParams::EdgeVarying {
                phi0: gphi0,
                phi: gphi,
                ..
            },
            LayerTape::EdgeVarying { x, z, u, y },
        ) => {
            let du = activation_backward(spec.nonlinearity, u, y, dy);
            let n = du.nrows();
            let order = phi.dim().2;
            let mut dx = Array2::zeros(x.dim());
            for f in 0..spec.out_features {
                let dyf = column(&du, f);
                for g in 0..spec.in_features {
                    let zs = &z[f][g];
                    // c_k = ∂J/∂z^(k), accumulated from the top of the chain
                    let mut c = dyf.clone();
                    let mut tmp = Array2::zeros((n, 1));
                    for k in (1..=order).rev() {
                        let coeffs = phi.slice(s![f, g, k - 1, ..]);
                        let coeffs = coeffs.as_slice().expect("standard layout");
                        let mut gk = gphi.slice_mut(s![f, g, k - 1, ..]);
                        let gk = gk.as_slice_mut().expect("standard layout");
                        let zprev = zs[k - 1].as_slice().expect("column vector");
                        let cs = c.as_slice().expect("column vector");
                        for (i, &ci) in cs.iter().enumerate() {
                            for p in support.row_range(i) {
                                gk[p] += ci * zprev[support.col(p)];
                            }
                        }
                        support.apply_transpose_into(coeffs, c.view(), tmp.view_mut());
                        Zip::from(&mut tmp).and(&dyf).for_each(|t, &d| *t += d);
                        std::mem::swap(&mut c, &mut tmp);
                    }
                    for i in 0..n {
                        gphi0[[f, g, i]] += c[[i, 0]] * x[[i, g]];
                        dx[[i, g]] += phi0[[f, g, i]] * c[[i, 0]];
                    }
                }
            }
            dx
        }
        _ => unreachable!("tape and parameters come from the same model"),
    }
}

fn readout_forward(r: Option<&ReadoutParams>, h: &Array2<f64>) -> Array2<f64> {
    match r {
        None => h.clone(),
        Some(r) => {
            let mut out = h.dot(&r.weight.t());
            out += &r.bias;
            out
        }
    }
}

fn readout_backward(
    r: &ReadoutParams,
    gr: &mut ReadoutParams,
    h: &Array2<f64>,
    dy: &Array2<f64>,
) -> Array2<f64> {
    gr.weight += &dy.t().dot(h);
    gr.bias += &dy.sum_axis(Axis(0));
    dy.dot(&r.weight)
}

/// One delayed FIR layer evaluated at times `0..out_len` (newest first).
fn delayed_forward(
    taps: &Array3<f64>,
    sigma: Nonlinearity,
    shifts: &[&ShiftOperator],
    xs: Vec<Array2<f64>>,
    out_len: usize,
) -> Result<LayerTape> {
    let order = taps.dim().2 - 1;
    let avail = xs.len();
    let (n, _) = xs[0].dim();
    let mut z: Vec<Vec<Array2<f64>>> = Vec::with_capacity(order + 1);
    z.push(xs);
    for k in 1..=order {
        let len = (out_len + order - k).min(avail.saturating_sub(k));
        let mut level = Vec::with_capacity(len);
        for j in 0..len {
            let s = shifts.get(j).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "shift history has {} operators, delayed filter needs S(t-{j})",
                    shifts.len()
                ))
            })?;
            let mut next = Array2::zeros(z[k - 1][j + 1].dim());
            s.shift_into(z[k - 1][j + 1].view(), next.view_mut());
            level.push(next);
        }
        z.push(level);
    }
    let fo = taps.dim().0;
    let mut us = Vec::with_capacity(out_len);
    let mut ys = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let mut u = Array2::zeros((n, fo));
        for (k, level) in z.iter().enumerate() {
            if let Some(zk) = level.get(j) {
                let hk = taps.slice(s![.., .., k]);
                u += &zk.dot(&hk.t());
            }
        }
        ys.push(activate(sigma, &u));
        us.push(u);
    }
    Ok(LayerTape::Delayed { z, u: us, y: ys })
}

fn delayed_backward(
    taps: &Array3<f64>,
    gtaps: &mut Array3<f64>,
    sigma: Nonlinearity,
    tape: &LayerTape,
    shifts: &[&ShiftOperator],
    dys: Vec<Array2<f64>>,
) -> Vec<Array2<f64>> {
    let LayerTape::Delayed { z, u, y } = tape else {
        unreachable!()
    };
    let mut gz: Vec<Vec<Array2<f64>>> = z
        .iter()
        .map(|level| level.iter().map(|a| Array2::zeros(a.dim())).collect())
        .collect();
    for (j, dy) in dys.into_iter().enumerate() {
        let du = activation_backward(sigma, &u[j], &y[j], dy);
        for (k, level) in z.iter().enumerate() {
            if let Some(zk) = level.get(j) {
                let mut gk = gtaps.slice_mut(s![.., .., k]);
                gk += &du.t().dot(zk);
                gz[k][j] += &du.dot(&taps.slice(s![.., .., k]));
            }
        }
    }
    for k in (1..z.len()).rev() {
        let (lower, upper) = gz.split_at_mut(k);
        for (j, g) in upper[0].iter().enumerate() {
            let mut tmp = Array2::zeros(g.dim());
            shifts[j].shift_into(g.view(), tmp.view_mut());
            lower[k - 1][j + 1] += &tmp;
        }
    }
    gz.swap_remove(0)
}
