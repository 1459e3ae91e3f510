//! Analytic gradients against central finite differences.

use gspnn_core::filters::FirVariant;
use gspnn_core::neural::{
    LayerParams, LayerSpec, Model, ModelSpec, Nonlinearity, Readout, ShiftMode,
};
use gspnn_core::{Graph, GraphSignal, ShiftKind, ShiftOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

/// Re-draw every parameter except ARMA poles from U(-1, 1).
fn uniform_params(model: &mut Model, rng: &mut ChaCha8Rng) {
    let mut flat = model.state.flatten();
    let mut is_pole = vec![false; flat.len()];
    let mut offset = 0;
    for (name, t) in model.state.named_tensors() {
        if name.ends_with(".poles") {
            is_pole[offset..offset + t.len()]
                .iter_mut()
                .for_each(|p| *p = true);
        }
        offset += t.len();
    }
    for (v, pole) in flat.iter_mut().zip(is_pole) {
        if !pole {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    model.state.unflatten(&flat).unwrap();
    model.enforce_constraints(None).unwrap();
}

fn loss(y: &GraphSignal, target: &GraphSignal) -> f64 {
    0.5 * y
        .0
        .iter()
        .zip(target.0.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
}

/// Compare analytic and finite-difference gradients of `½‖Φ − y‖²`.
/// `eval` runs a forward pass; `grad` runs forward + backward.
fn check(
    label: &str,
    model: &Model,
    eval: impl Fn(&Model) -> GraphSignal,
    grad: impl Fn(&Model, &GraphSignal) -> Vec<f64>,
    target: &GraphSignal,
) {
    let y = eval(model);
    let resid = GraphSignal(&y.0 - &target.0);
    let analytic = grad(model, &resid);
    let base = model.state.flatten();
    let mut worst = 0.0_f64;
    let mut num = vec![0.0; base.len()];
    for i in 0..base.len() {
        let mut plus = model.clone();
        let mut p = base.clone();
        p[i] += STEP;
        plus.state.unflatten(&p).unwrap();
        plus.enforce_constraints(None).unwrap();
        let mut minus = model.clone();
        let mut m = base.clone();
        m[i] -= STEP;
        minus.state.unflatten(&m).unwrap();
        minus.enforce_constraints(None).unwrap();
        num[i] = (loss(&eval(&plus), target) - loss(&eval(&minus), target)) / (2.0 * STEP);
        let scale = analytic[i].abs().max(num[i].abs()).max(1e-2);
        let rel = (analytic[i] - num[i]).abs() / scale;
        assert!(
            rel <= REL_TOL,
            "{label}: {} analytic {} vs numeric {} (rel {rel:e})",
            model.state.param_path(i),
            analytic[i],
            num[i]
        );
        worst = worst.max(rel);
    }
    let diff: f64 = analytic
        .iter()
        .zip(&num)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = num.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(
        diff <= REL_TOL * norm.max(1e-12),
        "{label}: vector relative error {}",
        diff / norm
    );
}

fn instance(seed: u64) -> (ChaCha8Rng, ShiftOperator) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Graph::random(&mut rng, 8, 0.4, 0.5, 1.5);
    let s = ShiftOperator::from_graph(&g, ShiftKind::NormalizedAdjacency)
        .unwrap()
        .eigendecompose()
        .unwrap();
    (rng, s)
}

fn check_static(label: &str, spec: ModelSpec, seed: u64) {
    let (mut rng, s) = instance(seed);
    let mut model = Model::init(spec, Some(&s), &mut rng).unwrap();
    uniform_params(&mut model, &mut rng);
    let x = GraphSignal::random(&mut rng, 8, model.spec.in_features());
    let target = GraphSignal::random(&mut rng, 8, model.spec.out_features());
    check(
        label,
        &model,
        |m| m.predict(&s, &x).unwrap(),
        |m, r| {
            let (_, tape) = m.forward(&s, &x).unwrap();
            m.backward(&tape, r).unwrap().flatten()
        },
        &target,
    );
}

fn spec(layers: Vec<LayerSpec>, readout: Readout) -> ModelSpec {
    ModelSpec {
        layers,
        readout,
        shift_mode: ShiftMode::Static,
    }
}

#[test]
fn fir_gcnn_with_readout() {
    for seed in 0..3 {
        check_static(
            "fir",
            spec(
                vec![
                    LayerSpec::fir(2, 4, 3, Nonlinearity::Tanh),
                    LayerSpec::fir(4, 3, 2, Nonlinearity::Tanh),
                ],
                Readout::PerNodeLinear { out_dim: 2 },
            ),
            seed,
        );
    }
}

#[test]
fn fir_variants() {
    let variants = [
        (FirVariant::Gcn, 1, 0.0),
        (FirVariant::Sgc, 3, 0.0),
        (FirVariant::Gin, 1, 0.3),
    ];
    for (i, (v, k, eps)) in variants.into_iter().enumerate() {
        check_static(
            v.name(),
            spec(
                vec![
                    LayerSpec::fir(2, 3, k, Nonlinearity::Tanh).with_variant(v, eps),
                    LayerSpec::fir(3, 1, 1, Nonlinearity::Identity),
                ],
                Readout::None,
            ),
            10 + i as u64,
        );
    }
}

#[test]
fn arma_layers() {
    for seed in 20..23 {
        check_static(
            "arma",
            spec(
                vec![
                    LayerSpec::arma(2, 3, 2, 2, 3, Nonlinearity::Tanh),
                    LayerSpec::arma(3, 2, 1, 1, 2, Nonlinearity::Identity),
                ],
                Readout::PerNodeLinear { out_dim: 1 },
            ),
            seed,
        );
    }
}

#[test]
fn edge_varying_layers() {
    for seed in 30..33 {
        check_static(
            "edge_varying",
            spec(
                vec![
                    LayerSpec::edge_varying(2, 3, 3, Nonlinearity::Tanh),
                    LayerSpec::edge_varying(3, 2, 1, Nonlinearity::Identity),
                ],
                Readout::PerNodeLinear { out_dim: 1 },
            ),
            seed,
        );
    }
}

#[test]
fn mixed_families_and_relu() {
    let (mut rng, s) = instance(40);
    let spec = spec(
        vec![
            LayerSpec::fir(1, 4, 2, Nonlinearity::Relu),
            LayerSpec::arma(4, 2, 1, 1, 3, Nonlinearity::Tanh),
            LayerSpec::edge_varying(2, 2, 2, Nonlinearity::Relu),
        ],
        Readout::PerNodeLinear { out_dim: 1 },
    );
    let mut model = Model::init(spec, Some(&s), &mut rng).unwrap();
    uniform_params(&mut model, &mut rng);
    let x = GraphSignal::random(&mut rng, 8, 1);
    let target = GraphSignal::random(&mut rng, 8, 1);
    check(
        "mixed",
        &model,
        |m| m.predict(&s, &x).unwrap(),
        |m, r| {
            let (_, tape) = m.forward(&s, &x).unwrap();
            m.backward(&tape, r).unwrap().flatten()
        },
        &target,
    );
}

#[test]
fn time_varying_fir() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let shifts: Vec<ShiftOperator> = (0..6)
        .map(|_| {
            let g = Graph::random(&mut rng, 8, 0.4, 0.5, 1.5);
            ShiftOperator::from_graph(&g, ShiftKind::DegreeNormalizedAdjacency).unwrap()
        })
        .collect();
    let refs: Vec<&ShiftOperator> = shifts.iter().collect();
    let spec = ModelSpec {
        layers: vec![
            LayerSpec::fir(3, 4, 2, Nonlinearity::Tanh),
            LayerSpec::fir(4, 2, 3, Nonlinearity::Tanh),
        ],
        readout: Readout::PerNodeLinear { out_dim: 2 },
        shift_mode: ShiftMode::TimeVarying,
    };
    let mut model = Model::init(spec, None, &mut rng).unwrap();
    uniform_params(&mut model, &mut rng);
    let target = GraphSignal::random(&mut rng, 8, 2);
    // full history and a truncated one that exercises zero padding
    for len in [6, 4] {
        let xs: Vec<GraphSignal> = (0..len)
            .map(|_| GraphSignal::random(&mut rng, 8, 3))
            .collect();
        check(
            "time_varying",
            &model,
            |m| m.forward_history(&refs, &xs).unwrap().0,
            |m, r| {
                let (_, tape) = m.forward_history(&refs, &xs).unwrap();
                m.backward(&tape, r).unwrap().flatten()
            },
            &target,
        );
    }
}

#[test]
fn every_parameter_class_is_exercised() {
    let (mut rng, s) = instance(60);
    let spec = spec(
        vec![
            LayerSpec::fir(1, 2, 1, Nonlinearity::Tanh),
            LayerSpec::arma(2, 2, 1, 1, 2, Nonlinearity::Tanh),
            LayerSpec::edge_varying(2, 1, 1, Nonlinearity::Tanh),
        ],
        Readout::PerNodeLinear { out_dim: 1 },
    );
    let model = Model::init(spec, Some(&s), &mut rng).unwrap();
    let names: Vec<String> = model
        .state
        .named_tensors()
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    for want in [
        "taps",
        "direct",
        "residues",
        "poles",
        "phi0",
        "phi",
        "readout.weight",
        "readout.bias",
    ] {
        assert!(
            names.iter().any(|n| n.ends_with(want)),
            "{want} missing from {names:?}"
        );
    }
    assert!(matches!(
        model.state.layers[2],
        LayerParams::EdgeVarying { .. }
    ));
}
