use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gspnn_bench::{rng, shift, signal};
use gspnn_core::neural::{LayerSpec, Model, ModelSpec, Nonlinearity, Readout, ShiftMode};
use gspnn_core::optim::{batch_gradient, LossKind, Sample, Target};

fn spec(layer: LayerSpec) -> ModelSpec {
    ModelSpec {
        layers: vec![layer],
        readout: Readout::PerNodeLinear { out_dim: 1 },
        shift_mode: ShiftMode::Static,
    }
}

/// One mini-batch gradient on a 200-node graph, the recommender scale.
fn gradient(c: &mut Criterion) {
    let mut r = rng(5);
    let s = Arc::new(shift(&mut r, 200, 7.0));
    let samples: Vec<Sample> = (0..5)
        .map(|_| {
            Sample::new_static(
                s.clone(),
                signal(&mut r, 200, 1),
                Target::Dense(signal(&mut r, 200, 1).into_inner()),
            )
        })
        .collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    let layers = [
        ("fir", LayerSpec::fir(1, 64, 4, Nonlinearity::Relu)),
        ("arma", LayerSpec::arma(1, 64, 4, 1, 1, Nonlinearity::Relu)),
        (
            "edge_varying",
            LayerSpec::edge_varying(1, 64, 4, Nonlinearity::Relu),
        ),
    ];
    let mut g = c.benchmark_group("batch_gradient");
    g.sample_size(10);
    for (name, layer) in layers {
        let model = Model::init(spec(layer), Some(&s), &mut r).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(name), &model, |b, m| {
            b.iter(|| batch_gradient(m, &refs, LossKind::Mse).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, gradient);
criterion_main!(benches);
