//! Shared fixtures for the benchmarks.

use gspnn_core::{Graph, GraphSignal, ShiftKind, ShiftOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph with mean degree about `degree` and a degree-normalized
/// shift, which needs no eigensolve to build.
pub fn shift(rng: &mut ChaCha8Rng, n: usize, degree: f64) -> ShiftOperator {
    let p = (degree / (n as f64 - 1.0)).min(1.0);
    loop {
        let g = Graph::random(rng, n, p, 0.5, 1.5);
        if let Ok(s) = ShiftOperator::from_graph(&g, ShiftKind::DegreeNormalizedAdjacency) {
            return s;
        }
    }
}

pub fn signal(rng: &mut ChaCha8Rng, n: usize, f: usize) -> GraphSignal {
    GraphSignal::random(rng, n, f)
}
