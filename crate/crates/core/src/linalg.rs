//! Dense linear algebra kernels used by the spectral and analysis code.
//!
//! The symmetric eigensolver is the classical two-stage scheme: Householder
//! reduction to tridiagonal form followed by the implicit-shift QL iteration.
//! Everything here works on small-to-medium dense matrices (N up to a few
//! thousand) and allocates freely.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Iteration cap per eigenvalue in the QL stage.
pub const MAX_QL_SWEEPS: usize = 100;

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
///
/// `tol` is an absolute threshold on the off-diagonal entries of the
/// tridiagonal form; callers typically pass `1e-12 * ||A||_F`.
pub fn symmetric_eigen(a: ArrayView2<f64>, tol: f64) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut v = a.to_owned();
    let mut d = Array1::<f64>::zeros(n);
    let mut e = Array1::<f64>::zeros(n);
    tridiagonalize(&mut v, &mut d, &mut e);
    tql(&mut v, &mut d, &mut e, tol)?;
    Ok((d, v))
}

/// Householder tridiagonalization (EISPACK `tred2`). On exit `v` holds the
/// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
/// subdiagonal.
fn tridiagonalize(v: &mut Array2<f64>, d: &mut Array1<f64>, e: &mut Array1<f64>) {
    let n = v.nrows();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
                v[[j, i]] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in (j + 1)..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[[k, j]] -= f * e[k] + g * d[k];
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    v[[k, j]] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = 0.0;
    }
    v[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal form (EISPACK `tql2`), then sort
/// ascending.
fn tql(v: &mut Array2<f64>, d: &mut Array1<f64>, e: &mut Array1<f64>, tol: f64) -> Result<()> {
    let n = v.nrows();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= tol.max(f64::EPSILON * tst1) {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence(MAX_QL_SWEEPS));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= tol.max(f64::EPSILON * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // selection sort keeps column moves to at most n swaps
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                v.swap([j, i], [j, k]);
            }
        }
    }
    Ok(())
}

/// Flip each column so its largest-magnitude entry is positive (lowest index
/// wins ties).
pub fn normalize_eigenvector_signs(v: &mut Array2<f64>) {
    for mut col in v.columns_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, x) in col.iter().enumerate() {
            // strict comparison keeps the lowest index on ties
            if x.abs() > best_abs + 1e-14 {
                best = i;
                best_abs = x.abs();
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Operator 2-norm of a symmetric matrix (largest |eigenvalue|).
pub fn symmetric_operator_norm(a: ArrayView2<f64>) -> Result<f64> {
    let scale = frobenius(a);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let (vals, _) = symmetric_eigen(a, 1e-14 * scale)?;
    Ok(vals.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
}

/// Operator 2-norm of a general matrix, via the eigenvalues of AᵀA.
pub fn operator_norm(a: ArrayView2<f64>) -> Result<f64> {
    let ata = a.t().dot(&a);
    Ok(symmetric_operator_norm(ata.view())?.max(0.0).sqrt())
}

/// Solve `A X = B` with partial-pivot LU. `None` if A is numerically singular.
pub fn solve(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.nrows());
    let mut lu = a.to_owned();
    let mut x = b.to_owned();
    let scale = lu
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if lu[[r, col]].abs() > lu[[piv, col]].abs() {
                piv = r;
            }
        }
        if lu[[piv, col]].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                lu.swap([piv, c], [col, c]);
            }
            for c in 0..x.ncols() {
                x.swap([piv, c], [col, c]);
            }
        }
        let p = lu[[col, col]];
        for r in (col + 1)..n {
            let factor = lu[[r, col]] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                lu[[r, c]] -= factor * lu[[col, c]];
            }
            for c in 0..x.ncols() {
                x[[r, c]] -= factor * x[[col, c]];
            }
        }
    }
    for col in (0..n).rev() {
        for c in 0..x.ncols() {
            let mut acc = x[[col, c]];
            for k in (col + 1)..n {
                acc -= lu[[col, k]] * x[[k, c]];
            }
            x[[col, c]] = acc / lu[[col, col]];
        }
    }
    Some(x)
}
