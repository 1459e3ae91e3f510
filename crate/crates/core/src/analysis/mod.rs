//! Relative distance between graphs, integral Lipschitz constants and
//! perturbation experiments for FIR GCNNs.

use std::io::Write;

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{linspace, ArmaParams, FirTaps};
use crate::graph::{GraphSignal, Permutation, ShiftOperator};
use crate::linalg;
use crate::neural::{FilterFamily, LayerParams, Model, Readout};

/// Largest N for which every permutation is tried.
pub const EXACT_SEARCH_MAX_NODES: usize = 8;
/// `|λ_i + λ_j|` below this makes the Sylvester map singular for that pair.
pub const SINGULAR_PAIR_TOL: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    ExactBruteforce,
    IdentityPermutation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeDistanceResult {
    /// `‖E⋆‖₂`
    pub distance: f64,
    pub error_matrix: Array2<f64>,
    pub permutation: Permutation,
    pub method: DistanceMethod,
    /// some pair had `|λ_i + λ_j| < 1e-9` and got the least-norm coefficient
    pub singular: bool,
    /// `‖P⋆ᵀŜP⋆ − S − (E⋆S + SE⋆)‖_F`
    pub residual: f64,
    /// residual within `1e-8 · max(1, ‖P⋆ᵀŜP⋆ − S‖_F)`
    pub feasible: bool,
}

struct Candidate {
    distance: f64,
    e: Array2<f64>,
    singular: bool,
    residual: f64,
    feasible: bool,
}

/// Symmetric least-norm `E` solving `M = ES + SE` in the eigenbasis of `S`.
fn solve_error_matrix(
    lambda: &[f64],
    v: &Array2<f64>,
    s: &Array2<f64>,
    m: &Array2<f64>,
) -> Result<Candidate> {
    let n = lambda.len();
    let mt = v.t().dot(m).dot(v);
    let mut et = Array2::zeros((n, n));
    let mut singular = false;
    for i in 0..n {
        for j in 0..n {
            let den = lambda[i] + lambda[j];
            if den.abs() < SINGULAR_PAIR_TOL {
                singular = true;
            } else {
                et[[i, j]] = mt[[i, j]] / den;
            }
        }
    }
    let mut e = v.dot(&et).dot(&v.t());
    // symmetrize away roundoff
    let et2 = e.t().to_owned();
    e = (&e + &et2) * 0.5;
    let recon = e.dot(s) + s.dot(&e);
    let residual = linalg::frobenius((&recon - m).view());
    let feasible = residual <= 1e-8 * linalg::frobenius(m.view()).max(1.0);
    let distance = linalg::symmetric_operator_norm(e.view())?;
    Ok(Candidate {
        distance,
        e,
        singular,
        residual,
        feasible,
    })
}

fn permuted_dense(s_hat: &Array2<f64>, p: &Permutation) -> Array2<f64> {
    let n = p.len();
    Array2::from_shape_fn((n, n), |(i, j)| s_hat[[p.0[i], p.0[j]]])
}

/// Relative distance modulo permutations: the smallest `‖E‖` over
/// `PᵀŜP = S + ES + SE`. The exact method tries all `N!` permutations
/// (N ≤ 8) and keeps the lexicographically first minimizer among feasible
/// candidates; the identity method fixes `P = I`, an upper bound.
pub fn relative_distance(
    s: &ShiftOperator,
    s_hat: &ShiftOperator,
    method: DistanceMethod,
) -> Result<RelativeDistanceResult> {
    let n = s.n_nodes();
    if s_hat.n_nodes() != n {
        return Err(Error::DimensionMismatch(format!(
            "graphs have {n} and {} nodes",
            s_hat.n_nodes()
        )));
    }
    if method == DistanceMethod::ExactBruteforce && n > EXACT_SEARCH_MAX_NODES {
        return Err(Error::InvalidArgument(format!(
            "exact permutation search is limited to N <= {EXACT_SEARCH_MAX_NODES}, got {n}"
        )));
    }
    let owned;
    let eig = match s.eig() {
        Some(e) => e,
        None => {
            owned = s.eigendecompose()?;
            owned.eig().expect("just computed")
        }
    };
    let lambda = eig.values.to_vec();
    let v = &eig.vectors;
    let sd = s.to_dense();
    let shd = s_hat.to_dense();
    let evaluate = |p: &Permutation| -> Result<Candidate> {
        let m = permuted_dense(&shd, p) - &sd;
        solve_error_matrix(&lambda, v, &sd, &m)
    };
    let (best_p, best) = match method {
        DistanceMethod::IdentityPermutation => {
            let p = Permutation::identity(n);
            let c = evaluate(&p)?;
            (p, c)
        }
        DistanceMethod::ExactBruteforce => {
            let mut perms = Vec::new();
            let mut p = Permutation::identity(n);
            loop {
                perms.push(p.clone());
                if !p.next_lexicographic() {
                    break;
                }
            }
            let cands: Vec<Result<Candidate>> = perms.par_iter().map(evaluate).collect();
            let mut best: Option<(usize, Candidate)> = None;
            for (i, c) in cands.into_iter().enumerate() {
                let c = c?;
                let better = match &best {
                    None => true,
                    Some((_, b)) => {
                        (c.feasible && !b.feasible)
                            || (c.feasible == b.feasible && c.distance < b.distance)
                    }
                };
                if better {
                    best = Some((i, c));
                }
            }
            let (i, c) = best.expect("at least the identity");
            (perms.swap_remove(i), c)
        }
    };
    Ok(RelativeDistanceResult {
        distance: best.distance,
        error_matrix: best.e,
        permutation: best_p,
        method,
        singular: best.singular,
        residual: best.residual,
        feasible: best.feasible,
    })
}

/// A scalar frequency response with an analytic derivative.
pub trait FrequencyResponse {
    fn response(&self, lambda: f64) -> Result<f64>;
    fn response_derivative(&self, lambda: f64) -> Result<f64>;
    /// Real poles of the response, if any.
    fn poles(&self) -> &[f64] {
        &[]
    }
}

impl FrequencyResponse for FirTaps {
    fn response(&self, lambda: f64) -> Result<f64> {
        Ok(self.eval(lambda))
    }

    fn response_derivative(&self, lambda: f64) -> Result<f64> {
        Ok(self.derivative(lambda))
    }
}

impl FrequencyResponse for ArmaParams {
    fn response(&self, lambda: f64) -> Result<f64> {
        self.eval(lambda)
    }

    fn response_derivative(&self, lambda: f64) -> Result<f64> {
        self.derivative(lambda)
    }

    fn poles(&self) -> &[f64] {
        &self.poles
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `max |λ h'(λ)|` over the grid
    pub c: f64,
    pub max_abs_response: f64,
    pub grid: Vec<f64>,
}

/// Integral Lipschitz constant of `h` estimated on an evenly spaced grid.
pub fn integral_lipschitz(
    h: &dyn FrequencyResponse,
    interval: (f64, f64),
    grid_points: usize,
) -> Result<LipschitzReport> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(
            "the λ grid needs at least 2 points".into(),
        ));
    }
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("bad interval [{lo}, {hi}]")));
    }
    if let Some(&g) = h.poles().iter().find(|&&g| g >= lo && g <= hi) {
        return Err(Error::ResponsePoleHit(g));
    }
    let grid = linspace(lo, hi, grid_points);
    let mut c = 0.0_f64;
    let mut max_abs = 0.0_f64;
    for &l in &grid {
        c = c.max((l * h.response_derivative(l)?).abs());
        max_abs = max_abs.max(h.response(l)?.abs());
    }
    Ok(LipschitzReport {
        c,
        max_abs_response: max_abs,
        grid,
    })
}

/// `[min(λ_1, 0) − m, λ_N + m]` with `m = 0.1 (λ_N − λ_1)` over the union of
/// the given spectra.
pub fn spectral_interval(spectra: &[&[f64]]) -> (f64, f64) {
    let lo = spectra
        .iter()
        .flat_map(|s| s.iter())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = spectra
        .iter()
        .flat_map(|s| s.iter())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let m = 0.1 * (hi - lo);
    (lo.min(0.0) - m, hi + m)
}

/// `(1 + ε) S`: eigenvalues scale, eigenvectors are kept.
pub fn dilate(s: &ShiftOperator, epsilon: f64) -> Result<ShiftOperator> {
    if epsilon.is_nan() || epsilon <= -1.0 {
        return Err(Error::InvalidArgument(format!(
            "dilation needs ε > -1, got {epsilon}"
        )));
    }
    Ok(s.scaled(1.0 + epsilon))
}

#[derive(Clone, Debug)]
pub enum Perturbation {
    /// `Ŝ = (1 + ε) S`, with `E⋆ = (ε/2) I` and `U = V`
    Dilation(f64),
    /// an arbitrary perturbed graph; `E⋆`, `P⋆` come from [`relative_distance`]
    Graph {
        s_hat: ShiftOperator,
        method: DistanceMethod,
    },
}

/// Deviations are reported per unit input norm: `measured` is the largest
/// `‖Φ(x; S) − Φ(x; P⋆ᵀŜP⋆)‖ / ‖x‖` and `bound` is `2C(1 + δ√N)Lε`, so that
/// the inequality reads `measured ≤ bound + slack`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub bound: f64,
    /// second-order allowance `10 ε²`
    pub slack: f64,
    pub measured: f64,
    /// `‖Δ_i‖ / ‖x_i‖` for every input
    pub per_input: Vec<f64>,
    pub n_nodes: usize,
    pub depth: usize,
    pub relative_distance: f64,
    /// every filter has `|h(λ)| ≤ 1` on the grid
    pub normalization_ok: bool,
    /// single-feature layers without readout, as the bound assumes
    pub within_assumptions: bool,
    /// the Sylvester solve hit a singular eigenvalue pair
    pub singular: bool,
    /// `E⋆` has repeated eigenvalues, so `U` (and δ) is not unique
    pub eigenbasis_ambiguous: bool,
    /// `None` when normalization fails and the bound is not asserted
    pub holds: Option<bool>,
}

/// FIR taps of every filter in an FIR model.
pub fn model_filters(model: &Model) -> Result<Vec<FirTaps>> {
    let mut out = Vec::new();
    for (l, p) in model.state.layers.iter().enumerate() {
        let LayerParams::Fir { taps } = p else {
            return Err(Error::InvalidModel(format!(
                "layer {l} is {}, stability analysis needs FIR layers",
                p.family()
            )));
        };
        for lane in taps.lanes(Axis(2)) {
            out.push(FirTaps::new(lane.to_vec()));
        }
    }
    Ok(out)
}

/// Smallest interval holding the spectra of both operators.
pub fn union_interval(s: &ShiftOperator, s_hat: &ShiftOperator) -> Result<(f64, f64)> {
    let a = s.eigendecompose()?;
    let b = s_hat.eigendecompose()?;
    let ea = a.eig().expect("computed").values.to_vec();
    let eb = b.eig().expect("computed").values.to_vec();
    Ok(spectral_interval(&[&ea, &eb]))
}

/// `max |h(λ)|` over the closed interval: endpoints plus every critical
/// point, located by sign changes of `h'` on a grid `8 × grid_points` fine
/// and refined by bisection.
pub fn fir_peak(h: &FirTaps, interval: (f64, f64), grid_points: usize) -> f64 {
    let (lo, hi) = interval;
    let grid = linspace(lo, hi, 8 * grid_points.max(2));
    let mut peak = h.eval(lo).abs().max(h.eval(hi).abs());
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (da, db) = (h.derivative(a), h.derivative(b));
        peak = peak.max(h.eval(a).abs());
        if da == 0.0 || da.signum() == db.signum() {
            continue;
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if h.derivative(m).signum() == da.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        peak = peak.max(h.eval(a).abs()).max(h.eval(b).abs());
    }
    peak
}

/// Scale every filter of an FIR model so that `max |h(λ)| = 1` over the
/// whole of `interval` (not just a grid on it), so any grid inside the
/// interval sees `|h| ≤ 1`. Filters already inside the unit band are scaled
/// up to touch it.
pub fn normalize_fir_model(
    model: &mut Model,
    interval: (f64, f64),
    grid_points: usize,
) -> Result<()> {
    for (l, p) in model.state.layers.iter_mut().enumerate() {
        let LayerParams::Fir { taps } = p else {
            return Err(Error::InvalidModel(format!("layer {l} is not FIR")));
        };
        for mut lane in taps.lanes_mut(Axis(2)) {
            let peak = fir_peak(&FirTaps::new(lane.to_vec()), interval, grid_points);
            if peak > 0.0 {
                lane.mapv_inplace(|v| v / peak);
            }
        }
    }
    Ok(())
}

/// Compare the model on `S` and on the aligned perturbed graph for every
/// input and evaluate the first-order stability bound.
pub fn stability_experiment(
    model: &Model,
    s: &ShiftOperator,
    perturbation: &Perturbation,
    inputs: &[GraphSignal],
) -> Result<StabilityReport> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "stability experiment needs inputs".into(),
        ));
    }
    if model
        .spec
        .layers
        .iter()
        .any(|l| l.family != FilterFamily::Fir)
    {
        return Err(Error::InvalidModel(
            "stability analysis needs an FIR GCNN".into(),
        ));
    }
    let n = s.n_nodes();
    let s = &s.eigendecompose()?;
    let (aligned, epsilon, delta, rd, singular, ambiguous) = match perturbation {
        Perturbation::Dilation(eps) => {
            let aligned = dilate(s, *eps)?;
            (aligned, *eps, 0.0, eps.abs() / 2.0, false, false)
        }
        Perturbation::Graph { s_hat, method } => {
            let r = relative_distance(s, s_hat, *method)?;
            let aligned = s_hat.permuted(&r.permutation);
            let (delta, ambiguous) = eigenvector_misalignment(s, &r.error_matrix)?;
            (
                aligned, r.distance, delta, r.distance, r.singular, ambiguous,
            )
        }
    };
    let interval = union_interval(s, &aligned)?;
    let mut c = 0.0_f64;
    let mut max_abs = 0.0_f64;
    for h in model_filters(model)? {
        let rep = integral_lipschitz(&h, interval, DEFAULT_GRID_POINTS)?;
        c = c.max(rep.c);
        max_abs = max_abs.max(rep.max_abs_response);
    }
    let depth = model.spec.layers.len();
    let within_assumptions = model.spec.readout == Readout::None
        && model
            .spec
            .layers
            .iter()
            .all(|l| l.in_features == 1 && l.out_features == 1);
    let normalization_ok = max_abs <= 1.0 + 1e-12;
    let bound = 2.0 * c * (1.0 + delta * (n as f64).sqrt()) * depth as f64 * epsilon;
    let slack = 10.0 * epsilon * epsilon;
    let per_input = inputs
        .iter()
        .map(|x| {
            let y = model.predict(s, x)?;
            let yh = model.predict(&aligned, x)?;
            let norm = x.norm();
            let d = y.distance(&yh);
            Ok(if norm > 0.0 { d / norm } else { d })
        })
        .collect::<Result<Vec<f64>>>()?;
    let measured = per_input.iter().copied().fold(0.0, f64::max);
    let holds = normalization_ok.then_some(measured <= bound + slack);
    Ok(StabilityReport {
        epsilon,
        delta,
        c,
        bound,
        slack,
        measured,
        per_input,
        n_nodes: n,
        depth,
        relative_distance: rd,
        normalization_ok,
        within_assumptions,
        singular,
        eigenbasis_ambiguous: ambiguous,
        holds,
    })
}

/// `δ = (‖U − V‖ + 1)² − 1` between the eigenbases of `S` and `E`, both
/// under the graph module's sign convention.
pub fn eigenvector_misalignment(s: &ShiftOperator, e: &Array2<f64>) -> Result<(f64, bool)> {
    let owned;
    let eig = match s.eig() {
        Some(e) => e,
        None => {
            owned = s.eigendecompose()?;
            owned.eig().expect("computed")
        }
    };
    let scale = linalg::frobenius(e.view()).max(1e-300);
    let (vals, u) = linalg::symmetric_eigen(e.view(), 1e-12 * scale)?;
    let ambiguous = vals
        .windows(2)
        .into_iter()
        .any(|w| (w[1] - w[0]).abs() <= 1e-9 * scale)
        || eig
            .values
            .windows(2)
            .into_iter()
            .any(|w| (w[1] - w[0]).abs() <= 1e-9);
    let diff = &u - &eig.vectors;
    let norm = linalg::operator_norm(diff.view())?;
    Ok(((norm + 1.0).powi(2) - 1.0, ambiguous))
}

/// `epsilon,measured,bound,delta,C`.
pub fn write_stability_csv<W: Write>(
    mut out: W,
    reports: &[StabilityReport],
) -> std::io::Result<()> {
    writeln!(out, "epsilon,measured,bound,delta,C")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epsilon, r.measured, r.bound, r.delta, r.c
        )?;
    }
    Ok(())
}

/// Inputs drawn uniformly and scaled to unit norm.
pub fn unit_inputs<R: Rng + ?Sized>(
    rng: &mut R,
    n_nodes: usize,
    n_features: usize,
    count: usize,
) -> Vec<GraphSignal> {
    (0..count)
        .map(|_| {
            let mut x = GraphSignal::random(rng, n_nodes, n_features);
            let norm = x.norm();
            x.0.mapv_inplace(|v| v / norm);
            x
        })
        .collect()
}
