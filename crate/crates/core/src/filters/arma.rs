//! ARMA graph filters in partial-fraction form
//! `Σ_p β_p (S - γ_p I)^{-1} x + Σ_k α_k S^k x`, evaluated either exactly
//! (dense solve) or with truncated parallel Jacobi iterations.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fir::fir_accumulate;
use super::FrequencySample;
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftOperator};
use crate::linalg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaParams {
    /// γ_p
    pub poles: Vec<f64>,
    /// β_p
    pub residues: Vec<f64>,
    /// α_0..α_K
    pub direct: Vec<f64>,
    /// Jacobi iterations T
    pub jacobi_iters: usize,
}

impl ArmaParams {
    pub fn new(
        poles: Vec<f64>,
        residues: Vec<f64>,
        direct: Vec<f64>,
        jacobi_iters: usize,
    ) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(Error::InvalidFilter(format!(
                "{} poles but {} residues",
                poles.len(),
                residues.len()
            )));
        }
        if poles
            .iter()
            .chain(&residues)
            .chain(&direct)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("ARMA parameters".into()));
        }
        if jacobi_iters == 0 {
            return Err(Error::InvalidFilter(
                "Jacobi iterations must be >= 1".into(),
            ));
        }
        Ok(ArmaParams {
            poles,
            residues,
            direct,
            jacobi_iters,
        })
    }

    /// Random initialization: poles uniform in `[1.5, 3] λ_max` with
    /// alternating signs; residues and direct taps zero-mean uniform with
    /// half-width `1/√(K+P+1)`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_poles: usize,
        order: usize,
        jacobi_iters: usize,
        lambda_max: f64,
    ) -> Self {
        let lm = lambda_max.abs().max(1e-6);
        let width = 1.0 / ((order + n_poles + 1) as f64).sqrt();
        let poles = (0..n_poles)
            .map(|p| {
                let mag = rng.random_range(1.5 * lm..=3.0 * lm);
                if p % 2 == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let residues = (0..n_poles)
            .map(|_| rng.random_range(-width..width))
            .collect();
        let direct = (0..=order)
            .map(|_| rng.random_range(-width..width))
            .collect();
        ArmaParams {
            poles,
            residues,
            direct,
            jacobi_iters,
        }
    }

    pub fn n_poles(&self) -> usize {
        self.poles.len()
    }

    /// `h(λ) = Σ_p β_p / (λ - γ_p) + Σ_k α_k λ^k`.
    pub fn eval(&self, lambda: f64) -> Result<f64> {
        let mut acc = self.direct.iter().rev().fold(0.0, |a, &c| a * lambda + c);
        for (&g, &b) in self.poles.iter().zip(&self.residues) {
            let den = lambda - g;
            if den.abs() <= f64::EPSILON * g.abs().max(1.0) {
                return Err(Error::ResponsePoleHit(lambda));
            }
            acc += b / den;
        }
        Ok(acc)
    }

    /// `h'(λ)`.
    pub fn derivative(&self, lambda: f64) -> Result<f64> {
        let mut acc = self
            .direct
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |a, (k, &c)| a * lambda + k as f64 * c);
        for (&g, &b) in self.poles.iter().zip(&self.residues) {
            let den = lambda - g;
            if den.abs() <= f64::EPSILON * g.abs().max(1.0) {
                return Err(Error::ResponsePoleHit(lambda));
            }
            acc -= b / (den * den);
        }
        Ok(acc)
    }
}

/// Rational frequency response sampled at each λ.
pub fn arma_response(p: &ArmaParams, lambdas: &[f64]) -> Result<Vec<FrequencySample>> {
    lambdas
        .iter()
        .map(|&lambda| {
            Ok(FrequencySample {
                lambda,
                response: p.eval(lambda)?,
            })
        })
        .collect()
}

/// Exact evaluation through dense solves of `(S - γ_p I) u = x`.
pub fn arma_apply_direct(
    p: &ArmaParams,
    s: &ShiftOperator,
    x: &GraphSignal,
) -> Result<GraphSignal> {
    s.check_nodes(x.n_nodes())?;
    let mut out = Array2::zeros(x.0.dim());
    fir_accumulate(&p.direct, s, x.view(), out.view_mut());
    let dense = s.to_dense();
    let n = s.n_nodes();
    for (&gamma, &beta) in p.poles.iter().zip(&p.residues) {
        let shifted = &dense - &(Array2::<f64>::eye(n) * gamma);
        let u = linalg::solve(shifted.view(), x.view()).ok_or(Error::SingularPole(gamma))?;
        out.scaled_add(beta, &u);
    }
    Ok(GraphSignal(out))
}

/// Minimum distance kept between a pole and every diagonal entry of `S`:
/// `1e-3 (1 + ‖S‖₂)`.
pub fn pole_margin(s: &ShiftOperator) -> Result<f64> {
    Ok(1e-3 * (1.0 + s.spectral_norm()?))
}

/// Move `gamma` until it is at least `margin` away from every diagonal entry.
pub fn project_pole(gamma: f64, diagonal: &[f64], margin: f64) -> f64 {
    let mut g = gamma;
    for _ in 0..=diagonal.len() {
        let closest = diagonal
            .iter()
            .copied()
            .min_by(|a, b| (g - a).abs().total_cmp(&(g - b).abs()));
        match closest {
            Some(d) if (g - d).abs() < margin => {
                g = if g >= d { d + margin } else { d - margin };
            }
            _ => break,
        }
    }
    g
}

/// The parametric shift `R(γ) = -(D - γ I)^{-1} (S - D)` with `D = diag(S)`.
/// Shares the sparsity of the off-diagonal part of `S`.
#[derive(Clone, Debug)]
pub struct JacobiShift<'a> {
    s: &'a ShiftOperator,
    gamma: f64,
    /// 1 / (D_ii - γ)
    inv: Vec<f64>,
}

impl<'a> JacobiShift<'a> {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Diagonal of `(D - γ I)^{-1}`.
    pub fn inverse_diagonal(&self) -> &[f64] {
        &self.inv
    }

    pub fn n_nodes(&self) -> usize {
        self.s.n_nodes()
    }

    /// `out = R z`.
    pub fn apply_into(&self, z: ArrayView2<f64>, mut out: ArrayViewMut2<f64>) {
        let f = z.ncols();
        for i in 0..self.s.n_nodes() {
            let scale = -self.inv[i];
            for c in 0..f {
                let mut acc = 0.0;
                for (j, v) in self.s.row(i) {
                    if j != i {
                        acc += v * z[[j, c]];
                    }
                }
                out[[i, c]] = scale * acc;
            }
        }
    }

    /// `out = Rᵀ z`.
    pub fn apply_transpose_into(&self, z: ArrayView2<f64>, mut out: ArrayViewMut2<f64>) {
        let f = z.ncols();
        for j in 0..self.s.n_nodes() {
            for c in 0..f {
                let mut acc = 0.0;
                // S symmetric: column j of S equals row j
                for (i, v) in self.s.row(j) {
                    if i != j {
                        acc -= v * self.inv[i] * z[[i, c]];
                    }
                }
                out[[j, c]] = acc;
            }
        }
    }

    pub fn apply(&self, z: &GraphSignal) -> Result<GraphSignal> {
        self.s.check_nodes(z.n_nodes())?;
        let mut out = Array2::zeros(z.0.dim());
        self.apply_into(z.view(), out.view_mut());
        Ok(GraphSignal(out))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.s.n_nodes();
        let mut m = Array2::zeros((n, n));
        for (i, j, v) in self.s.entries() {
            if i != j {
                m[[i, j]] = -self.inv[i] * v;
            }
        }
        m
    }

    /// Spectral radius of `R(γ)` (not symmetric in general).
    pub fn spectral_radius(&self) -> f64 {
        spectral_radius_dense(&self.to_dense())
    }
}

/// Build `R(γ)`; fails when γ is closer than the pole margin to a diagonal
/// entry of `S`.
pub fn jacobi_shift(s: &ShiftOperator, gamma: f64) -> Result<JacobiShift<'_>> {
    let margin = pole_margin(s)?;
    jacobi_shift_with_margin(s, gamma, margin)
}

pub(crate) fn jacobi_shift_with_margin(
    s: &ShiftOperator,
    gamma: f64,
    margin: f64,
) -> Result<JacobiShift<'_>> {
    let mut inv = Vec::with_capacity(s.n_nodes());
    for &d in s.diagonal() {
        if (d - gamma).abs() < margin {
            return Err(Error::PoleTooClose {
                gamma,
                diag: d,
                margin,
            });
        }
        inv.push(1.0 / (d - gamma));
    }
    Ok(JacobiShift { s, gamma, inv })
}

/// T-step Jacobi approximation of the single-pole output `β (S - γI)^{-1} x`:
/// iterates `u_τ = (D - γI)^{-1} β x + R(γ) u_{τ-1}` from `u_0 = x`.
pub fn jacobi_single_pole(
    s: &ShiftOperator,
    gamma: f64,
    beta: f64,
    iters: usize,
    x: &GraphSignal,
) -> Result<GraphSignal> {
    s.check_nodes(x.n_nodes())?;
    if iters == 0 {
        return Err(Error::InvalidFilter(
            "Jacobi iterations must be >= 1".into(),
        ));
    }
    let r = jacobi_shift(s, gamma)?;
    let mut out = Array2::zeros(x.0.dim());
    jacobi_accumulate(&r, beta, iters, x.view(), out.view_mut());
    Ok(GraphSignal(out))
}

/// `out += u_T` for one pole.
pub(crate) fn jacobi_accumulate(
    r: &JacobiShift<'_>,
    beta: f64,
    iters: usize,
    x: ArrayView2<f64>,
    mut out: ArrayViewMut2<f64>,
) {
    let b = jacobi_forcing(r, beta, x);
    let mut u = x.to_owned();
    let mut next = Array2::zeros(x.dim());
    for _ in 0..iters {
        r.apply_into(u.view(), next.view_mut());
        next += &b;
        std::mem::swap(&mut u, &mut next);
    }
    out += &u;
}

/// `β (D - γI)^{-1} x`.
pub(crate) fn jacobi_forcing(r: &JacobiShift<'_>, beta: f64, x: ArrayView2<f64>) -> Array2<f64> {
    let mut b = x.to_owned();
    for (mut row, &inv) in b.rows_mut().into_iter().zip(&r.inv) {
        row.mapv_inplace(|v| beta * inv * v);
    }
    b
}

/// Jacobi ARMA filter of orders (P, T, K).
pub fn arma_apply_jacobi(
    p: &ArmaParams,
    s: &ShiftOperator,
    x: &GraphSignal,
) -> Result<GraphSignal> {
    s.check_nodes(x.n_nodes())?;
    if p.jacobi_iters == 0 && !p.poles.is_empty() {
        return Err(Error::InvalidFilter(
            "Jacobi iterations must be >= 1".into(),
        ));
    }
    let mut out = Array2::zeros(x.0.dim());
    if !p.poles.is_empty() {
        let margin = pole_margin(s)?;
        for (&gamma, &beta) in p.poles.iter().zip(&p.residues) {
            let r = jacobi_shift_with_margin(s, gamma, margin)?;
            jacobi_accumulate(&r, beta, p.jacobi_iters, x.view(), out.view_mut());
        }
    }
    fir_accumulate(&p.direct, s, x.view(), out.view_mut());
    Ok(GraphSignal(out))
}

/// Largest |eigenvalue| of a general square matrix, from the limit of
/// `‖Aᵏ‖^{1/k}` (Gelfand) evaluated with normalized repeated squaring.
pub fn spectral_radius_dense(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // log ‖A^(2^m)‖ / 2^m converges to log ρ(A)
    let mut m = a.clone();
    let mut log_scale = 0.0_f64;
    let mut estimate = 0.0;
    let mut power = 1.0_f64;
    for _ in 0..40 {
        let norm = linalg::frobenius(m.view());
        if norm == 0.0 {
            return 0.0;
        }
        m.mapv_inplace(|v| v / norm);
        log_scale += norm.ln();
        let est = (log_scale / power).exp();
        if (est - estimate).abs() <= 1e-12 * est.max(1e-300) {
            return est;
        }
        estimate = est;
        m = m.dot(&m);
        log_scale *= 2.0;
        power *= 2.0;
    }
    estimate
}

/// Per-pole spectral radii of R(γ_p) on a given shift.
pub fn jacobi_radii(p: &ArmaParams, s: &ShiftOperator) -> Result<Vec<f64>> {
    p.poles
        .iter()
        .map(|&g| Ok(jacobi_shift(s, g)?.spectral_radius()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::fir::fir_apply;
    use crate::graph::{Graph, ShiftKind};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge_shift() -> ShiftOperator {
        ShiftOperator::from_graph(
            &Graph::unweighted(2, &[(0, 1)]).unwrap(),
            ShiftKind::Adjacency,
        )
        .unwrap()
    }

    #[test]
    fn response_examples() {
        let p = ArmaParams::new(vec![], vec![], vec![1.0], 1).unwrap();
        assert!(arma_response(&p, &[-2.0, 0.0, 3.0])
            .unwrap()
            .iter()
            .all(|s| s.response == 1.0));
        let p = ArmaParams::new(vec![2.0], vec![1.0], vec![], 1).unwrap();
        assert_eq!(arma_response(&p, &[0.0]).unwrap()[0].response, -0.5);
        let p = ArmaParams::new(vec![2.0, -2.0], vec![1.0, 1.0], vec![1.0], 1).unwrap();
        // 1/(1-2) + 1/(1+2) + 1
        let expect = -1.0 + 1.0 / 3.0 + 1.0;
        assert_abs_diff_eq!(
            arma_response(&p, &[1.0]).unwrap()[0].response,
            expect,
            epsilon = 1e-15
        );
        assert!(matches!(
            arma_response(&p, &[2.0]),
            Err(Error::ResponsePoleHit(_))
        ));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = ArmaParams::new(vec![2.0, -3.0], vec![0.7, -0.2], vec![0.1, 0.5, -0.3], 1).unwrap();
        for &l in &[-1.0, 0.0, 0.4, 1.2] {
            let h = 1e-6;
            let fd = (p.eval(l + h).unwrap() - p.eval(l - h).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(p.derivative(l).unwrap(), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn direct_examples() {
        let s = edge_shift();
        let x = GraphSignal::from_vec(vec![1.0, 0.0]);
        let fir_only = ArmaParams::new(vec![], vec![], vec![1.0, 1.0], 1).unwrap();
        assert_eq!(
            arma_apply_direct(&fir_only, &s, &x).unwrap(),
            fir_apply(&vec![1.0, 1.0].into(), &s, &x).unwrap()
        );
        let single = ArmaParams::new(vec![2.0], vec![1.0], vec![], 1).unwrap();
        let y = arma_apply_direct(&single, &s, &x).unwrap();
        assert_abs_diff_eq!(y.0[[0, 0]], -2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y.0[[1, 0]], -1.0 / 3.0, epsilon = 1e-14);
        let zero = ArmaParams::new(vec![0.5, -4.0], vec![0.0, 0.0], vec![0.0], 1).unwrap();
        assert!(arma_apply_direct(&zero, &s, &x)
            .unwrap()
            .0
            .iter()
            .all(|&v| v == 0.0));
        let singular = ArmaParams::new(vec![1.0], vec![1.0], vec![], 1).unwrap();
        assert!(matches!(
            arma_apply_direct(&singular, &s, &x),
            Err(Error::SingularPole(_))
        ));
    }

    #[test]
    fn jacobi_shift_examples() {
        let s = edge_shift();
        let r = jacobi_shift(&s, 2.0).unwrap();
        assert_eq!(r.to_dense(), &s.to_dense() / 2.0);

        let aug = ShiftOperator::from_dense(array![[1.0, 1.0], [1.0, 1.0]].view()).unwrap();
        let r = jacobi_shift(&aug, 3.0).unwrap();
        assert_eq!(r.to_dense(), array![[0.0, 0.5], [0.5, 0.0]]);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Graph::random(&mut rng, 6, 0.5, 0.5, 1.5);
        let l = ShiftOperator::from_graph(&g, ShiftKind::Laplacian).unwrap();
        let r = jacobi_shift(&l, 1e9).unwrap();
        assert!(r.to_dense().iter().all(|v| v.abs() < 1e-6));

        assert!(matches!(
            jacobi_shift(&aug, 1.0 + 1e-6),
            Err(Error::PoleTooClose { .. })
        ));
        // transpose application agrees with the dense transpose
        let z = GraphSignal::random(&mut rng, 6, 2);
        let r = jacobi_shift(&l, 7.0).unwrap();
        let mut out = Array2::zeros((6, 2));
        r.apply_transpose_into(z.view(), out.view_mut());
        let expect = r.to_dense().t().dot(&z.view());
        assert!((&out - &expect).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn jacobi_single_pole_examples() {
        let s = edge_shift();
        let x = GraphSignal::from_vec(vec![1.0, -2.0]);
        let beta = 0.7;
        let gamma = 3.0;
        // one step: (D - γI)^{-1} β x + R x, with D = 0 here
        let y = jacobi_single_pole(&s, gamma, beta, 1, &x).unwrap();
        let r = jacobi_shift(&s, gamma).unwrap().to_dense();
        let expect = x.0.mapv(|v| -beta * v / gamma) + r.dot(&x.view());
        assert!((&y.0 - &expect).iter().all(|v| v.abs() < 1e-15));

        // β = 0, hollow S: S x / γ
        let y = jacobi_single_pole(&s, gamma, 0.0, 1, &x).unwrap();
        let expect = s.to_dense().dot(&x.view()) / gamma;
        assert!((&y.0 - &expect).iter().all(|v| v.abs() < 1e-15));

        assert!(jacobi_single_pole(&s, gamma, beta, 0, &x).is_err());
    }

    #[test]
    fn jacobi_converges_to_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Graph::random(&mut rng, 10, 0.4, 0.5, 1.0);
        let s = ShiftOperator::from_graph(&g, ShiftKind::Laplacian).unwrap();
        let x = GraphSignal::random(&mut rng, 10, 1);
        let lmax = s.spectral_norm().unwrap();
        let gamma = 2.0 * lmax;
        let rho = jacobi_shift(&s, gamma).unwrap().spectral_radius();
        assert!(rho < 1.0);
        let direct = ArmaParams::new(vec![gamma], vec![0.8], vec![], 1).unwrap();
        let exact = arma_apply_direct(&direct, &s, &x).unwrap();
        let approx = jacobi_single_pole(&s, gamma, 0.8, 200, &x).unwrap();
        assert!(approx.distance(&exact) <= 1e-6 * exact.norm());
    }

    #[test]
    fn arma_without_poles_is_fir() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Graph::random(&mut rng, 8, 0.4, 0.5, 1.0);
        let s = ShiftOperator::from_graph(&g, ShiftKind::Adjacency).unwrap();
        let x = GraphSignal::random(&mut rng, 8, 3);
        let taps = vec![0.3, -0.2, 0.9];
        let p = ArmaParams::new(vec![], vec![], taps.clone(), 1).unwrap();
        assert_eq!(
            arma_apply_jacobi(&p, &s, &x).unwrap(),
            fir_apply(&taps.into(), &s, &x).unwrap()
        );
        let p = ArmaParams::new(vec![5.0], vec![1.0], vec![0.2], 2).unwrap();
        let zero = arma_apply_jacobi(&p, &s, &GraphSignal::zeros(8, 1)).unwrap();
        assert!(zero.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pole_projection() {
        let diag = [0.0, 1.0];
        assert_eq!(project_pole(0.5, &diag, 0.1), 0.5);
        assert_eq!(project_pole(0.95, &diag, 0.1), 0.9);
        assert_eq!(project_pole(1.02, &diag, 0.1), 1.1);
        assert_eq!(project_pole(0.0, &diag, 0.1), 0.1);
        let g = project_pole(0.0, &[0.0, 0.1], 0.1);
        assert!(diag.iter().all(|d| (g - d).abs() >= 0.1 - 1e-15));
    }

    #[test]
    fn spectral_radius_of_known_matrices() {
        let a = array![[0.0, 0.5], [0.5, 0.0]];
        assert_abs_diff_eq!(spectral_radius_dense(&a), 0.5, epsilon = 1e-9);
        let b = array![[0.3, 2.0], [0.0, 0.6]];
        assert_abs_diff_eq!(spectral_radius_dense(&b), 0.6, epsilon = 1e-6);
    }
}
