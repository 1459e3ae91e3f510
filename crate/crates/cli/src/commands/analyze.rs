use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Subcommand, ValueEnum};
use gspnn_core::analysis::{
    dilate, integral_lipschitz, normalize_fir_model, relative_distance, stability_experiment,
    union_interval, unit_inputs, write_stability_csv, DistanceMethod, Perturbation,
};
use gspnn_core::filters::{linspace, write_response_csv, FrequencySample};
use gspnn_core::neural::{
    equivariance_error, LayerSpec, Model, ModelSpec, Nonlinearity, Readout, ShiftMode,
};
use gspnn_core::{GraphSignal, Permutation, ShiftKind, ShiftOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{load_shift, parse_range, random_shift, require_file, FilterArgs};
use crate::config::RunConfig;
use crate::manifest::OutputDir;

#[derive(Subcommand, Clone, Debug)]
pub enum AnalyzeCmd {
    /// Sample the frequency response h(λ) on an interval.
    Response {
        #[command(flatten)]
        filter: FilterArgs,
        /// `lo,hi`
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-1,1"
        )]
        lambda_range: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Integral Lipschitz constant max |λ h'(λ)| on an interval.
    Lipschitz {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-1,1"
        )]
        lambda_range: Vec<f64>,
    },
    /// Relative distance between two graphs modulo permutation.
    Distance {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        perturbed: PathBuf,
        #[arg(long)]
        shift_kind: Option<ShiftKind>,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
    },
    /// Output deviation of an FIR GCNN under dilations or a perturbed graph,
    /// against the first-order stability bound.
    Stability {
        /// dilation sizes, one report row each
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        epsilon: Vec<f64>,
        /// compare against this graph instead of dilating
        #[arg(long, conflicts_with = "epsilon")]
        perturbed: Option<PathBuf>,
        /// a random graph is drawn when absent
        #[arg(long)]
        graph: Option<PathBuf>,
        /// a random normalized single-feature FIR GCNN is drawn when absent
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        shift_kind: Option<ShiftKind>,
        #[arg(long)]
        inputs: Option<usize>,
    },
    /// Relative error of Φ(Pᵀx; PᵀSP) against PᵀΦ(x; S) over random
    /// graphs, permutations and inputs.
    Equivariance {
        #[arg(long)]
        trials: Option<usize>,
        /// largest graph size; sizes are drawn from 2..=n_nodes
        #[arg(long)]
        n_nodes: Option<usize>,
        /// fixed model instead of a fresh random FIR GCNN per trial
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Exact,
    Identity,
}

impl From<MethodArg> for DistanceMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => DistanceMethod::ExactBruteforce,
            MethodArg::Identity => DistanceMethod::IdentityPermutation,
        }
    }
}

/// FIR GCNN spec `1 → features → … → 1` with relu hidden layers and a linear
/// last layer, so the output is not clipped to zero.
pub fn fir_gcnn_spec(layers: usize, features: usize, order: usize) -> ModelSpec {
    let widths: Vec<usize> = (0..=layers)
        .map(|l| if l == 0 || l == layers { 1 } else { features })
        .collect();
    ModelSpec {
        layers: widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let sigma = if l + 1 == layers {
                    Nonlinearity::Identity
                } else {
                    Nonlinearity::Relu
                };
                LayerSpec::fir(w[0], w[1], order, sigma)
            })
            .collect(),
        readout: Readout::None,
        shift_mode: ShiftMode::Static,
    }
}

pub fn random_fir_gcnn<R: Rng + ?Sized>(
    rng: &mut R,
    layers: usize,
    features: usize,
    order: usize,
) -> Result<Model> {
    Ok(Model::init(
        fir_gcnn_spec(layers, features, order),
        None,
        rng,
    )?)
}

fn write_row(out: &mut OutputDir, name: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut w = out.writer(name)?;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(cmd: &AnalyzeCmd, cfg: &mut RunConfig, out: &mut OutputDir) -> Result<Vec<PathBuf>> {
    match cmd {
        AnalyzeCmd::Response {
            filter,
            lambda_range,
            points,
        } => {
            let (lo, hi) = parse_range(lambda_range, "--lambda-range")?;
            let f = filter.build()?;
            let h = f.response();
            let samples = linspace(lo, hi, *points)
                .into_iter()
                .map(|l| {
                    Ok(FrequencySample {
                        lambda: l,
                        response: h.response(l)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut w = out.writer("response.csv")?;
            write_response_csv(&mut w, &samples)?;
            w.flush()?;
            Ok(vec![])
        }
        AnalyzeCmd::Lipschitz {
            filter,
            lambda_range,
        } => {
            let (lo, hi) = parse_range(lambda_range, "--lambda-range")?;
            let f = filter.build()?;
            let r = integral_lipschitz(f.response(), (lo, hi), cfg.analysis.grid_points)?;
            log::info!("C = {:.6}, max |h| = {:.6}", r.c, r.max_abs_response);
            write_row(
                out,
                "lipschitz.csv",
                "filter,lo,hi,c,max_abs_response",
                &[format!(
                    "{},{lo},{hi},{},{}",
                    f.name(),
                    r.c,
                    r.max_abs_response
                )],
            )?;
            Ok(vec![])
        }
        AnalyzeCmd::Distance {
            graph,
            perturbed,
            shift_kind,
            method,
        } => {
            require_file(graph, "graph")?;
            require_file(perturbed, "perturbed graph")?;
            if let Some(k) = shift_kind {
                cfg.analysis.shift_kind = *k;
            }
            let s = load_shift(graph, cfg.analysis.shift_kind)?;
            let s_hat = load_shift(perturbed, cfg.analysis.shift_kind)?;
            let r = relative_distance(&s, &s_hat, (*method).into())?;
            log::info!(
                "relative distance {:.6e} (feasible: {})",
                r.distance,
                r.feasible
            );
            let perm: Vec<String> = r.permutation.0.iter().map(|p| p.to_string()).collect();
            write_row(
                out,
                "distance.csv",
                "distance,residual,feasible,singular,permutation",
                &[format!(
                    "{},{},{},{},{}",
                    r.distance,
                    r.residual,
                    r.feasible,
                    r.singular,
                    perm.join(" ")
                )],
            )?;
            out.write_json("distance.json", &r)?;
            Ok(vec![graph.clone(), perturbed.clone()])
        }
        AnalyzeCmd::Stability {
            epsilon,
            perturbed,
            graph,
            checkpoint,
            shift_kind,
            inputs,
        } => {
            if let Some(k) = shift_kind {
                cfg.analysis.shift_kind = *k;
            }
            if let Some(n) = inputs {
                cfg.analysis.inputs = *n;
            }
            for p in [graph, perturbed, checkpoint].into_iter().flatten() {
                require_file(p, "input")?;
            }
            if epsilon.is_empty() && perturbed.is_none() {
                bail!("pass --epsilon for dilations or --perturbed for a graph perturbation");
            }
            let a = &cfg.analysis;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let s = match graph {
                Some(g) => load_shift(g, a.shift_kind)?,
                None => random_shift(&mut rng, a.n_nodes, a.edge_probability, a.shift_kind)?,
            };
            let perturbations: Vec<Perturbation> = match perturbed {
                Some(p) => vec![Perturbation::Graph {
                    s_hat: load_shift(p, a.shift_kind)?,
                    method: DistanceMethod::ExactBruteforce,
                }],
                None => epsilon.iter().map(|&e| Perturbation::Dilation(e)).collect(),
            };
            let model = match checkpoint {
                Some(c) => Model::load(c)?,
                None => {
                    let mut m = Model::init(fir_gcnn_spec(a.layers, 1, a.order), None, &mut rng)?;
                    // normalize over every spectrum the reports will look at
                    let mut interval = union_interval(&s, &s)?;
                    for p in &perturbations {
                        let other = match p {
                            Perturbation::Dilation(e) => dilate(&s, *e)?,
                            Perturbation::Graph { s_hat, .. } => s_hat.clone(),
                        };
                        let (lo, hi) = union_interval(&s, &other)?;
                        interval = (interval.0.min(lo), interval.1.max(hi));
                    }
                    normalize_fir_model(&mut m, interval, a.grid_points)?;
                    m
                }
            };
            let xs = unit_inputs(&mut rng, s.n_nodes(), model.spec.in_features(), a.inputs);
            let reports = perturbations
                .iter()
                .map(|p| stability_experiment(&model, &s, p, &xs))
                .collect::<gspnn_core::Result<Vec<_>>>()?;
            for r in &reports {
                log::info!(
                    "ε = {}: measured {:.3e}, bound {:.3e} + {:.1e}, holds {:?}",
                    r.epsilon,
                    r.measured,
                    r.bound,
                    r.slack,
                    r.holds
                );
            }
            let mut w = out.writer("stability.csv")?;
            write_stability_csv(&mut w, &reports)?;
            w.flush()?;
            out.write_json("stability.json", &reports)?;
            Ok([graph, perturbed, checkpoint]
                .into_iter()
                .flatten()
                .cloned()
                .collect())
        }
        AnalyzeCmd::Equivariance {
            trials,
            n_nodes,
            checkpoint,
        } => {
            if let Some(t) = trials {
                cfg.analysis.trials = *t;
            }
            if let Some(n) = n_nodes {
                cfg.analysis.n_nodes = *n;
            }
            if let Some(c) = checkpoint {
                require_file(c, "checkpoint")?;
            }
            let a = &cfg.analysis;
            if a.n_nodes < 2 {
                bail!("equivariance trials need at least 2 nodes");
            }
            let fixed = checkpoint.as_ref().map(|c| Model::load(c)).transpose()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut rows = Vec::with_capacity(a.trials);
            let mut worst = 0.0f64;
            for t in 0..a.trials {
                let n = rng.random_range(2..=a.n_nodes);
                let s: ShiftOperator = random_shift(&mut rng, n, a.edge_probability, a.shift_kind)?;
                let model = match &fixed {
                    Some(m) => m.clone(),
                    None => random_fir_gcnn(&mut rng, a.layers, a.features, a.order)?,
                };
                let perm = Permutation::random(&mut rng, n);
                let x = GraphSignal::random(&mut rng, n, model.spec.in_features());
                let err = equivariance_error(&model, &s, &x, &perm)?;
                worst = worst.max(err);
                rows.push(format!("{t},{n},{err}"));
            }
            log::info!("worst relative equivariance error {worst:.3e}");
            write_row(out, "equivariance.csv", "trial,n_nodes,error", &rows)?;
            Ok(checkpoint.iter().cloned().collect())
        }
    }
}
