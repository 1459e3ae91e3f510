//! Delayed FIR filters for time-varying graphs:
//! `Σ_k h_k S(t) S(t-1) ⋯ S(t-k+1) x(t-k)`.
//!
//! Histories are ordered newest first: `shifts[0] = S(t)`,
//! `signals[0] = x(t)`. Terms whose delayed signal is missing are zero.

use ndarray::Array2;

use super::fir::FirTaps;
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, ShiftOperator};

pub fn delayed_fir_apply(
    h: &FirTaps,
    shift_history: &[ShiftOperator],
    signal_history: &[GraphSignal],
) -> Result<GraphSignal> {
    let first = signal_history
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty signal history".into()))?;
    let (n, f) = first.0.dim();
    for x in signal_history {
        if x.0.dim() != (n, f) {
            return Err(Error::DimensionMismatch(format!(
                "signal history mixes {:?} and {:?}",
                (n, f),
                x.0.dim()
            )));
        }
    }
    for s in shift_history {
        if s.n_nodes() != n {
            return Err(Error::DimensionMismatch(format!(
                "shift history has a {}-node operator, signals have {n} nodes",
                s.n_nodes()
            )));
        }
    }
    let mut out = Array2::zeros((n, f));
    let mut cur = Array2::zeros((n, f));
    let mut next = Array2::zeros((n, f));
    for (k, &hk) in h.taps.iter().enumerate() {
        let Some(xk) = signal_history.get(k) else {
            break;
        };
        if k > shift_history.len() {
            return Err(Error::InvalidArgument(format!(
                "term {k} needs {k} past shift operators, only {} given",
                shift_history.len()
            )));
        }
        // S(t-k+1) is applied first, S(t) last
        cur.assign(&xk.0);
        for j in (0..k).rev() {
            shift_history[j].shift_into(cur.view(), next.view_mut());
            std::mem::swap(&mut cur, &mut next);
        }
        out.scaled_add(hk, &cur);
    }
    Ok(GraphSignal(out))
}
