//! The three graph filter families (FIR, ARMA, edge-varying), delayed FIR
//! filters for time-varying graphs, and frequency-response export.

pub mod arma;
pub mod delayed;
pub mod edge_varying;
pub mod fir;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use arma::{
    arma_apply_direct, arma_apply_jacobi, arma_response, jacobi_radii, jacobi_shift,
    jacobi_single_pole, pole_margin, project_pole, ArmaParams, JacobiShift,
};
pub use delayed::delayed_fir_apply;
pub use edge_varying::{edge_varying_apply, EdgeSupport, EdgeVaryingParams};
pub use fir::{fir_apply, fir_mask, fir_response, FirConstraint, FirTaps, FirVariant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySample {
    pub lambda: f64,
    pub response: f64,
}

/// `lambda,response` CSV, one row per sample.
pub fn write_response_csv<W: Write>(
    mut out: W,
    samples: &[FrequencySample],
) -> std::io::Result<()> {
    writeln!(out, "lambda,response")?;
    for s in samples {
        writeln!(out, "{},{}", s.lambda, s.response)?;
    }
    Ok(())
}

/// `count` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_csv_layout() {
        let samples = fir_response(&FirTaps::new(vec![1.0, 1.0]), &linspace(-1.0, 1.0, 3));
        let mut buf = Vec::new();
        write_response_csv(&mut buf, &samples).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda,response\n-1,0\n0,1\n1,2\n"
        );
    }
}
