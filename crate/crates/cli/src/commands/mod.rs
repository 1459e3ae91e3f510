pub mod analyze;
pub mod filter;
pub mod flocking;
pub mod recsys;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use gspnn_core::analysis::FrequencyResponse;
use gspnn_core::filters::{ArmaParams, FirTaps};
use gspnn_core::{Graph, ShiftKind, ShiftOperator};
use rand::Rng;

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist or is not a file", path.display());
    }
    Ok(())
}

pub fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!(
            "{what} {} does not exist or is not a directory",
            path.display()
        );
    }
    Ok(())
}

pub fn load_shift(path: &Path, kind: ShiftKind) -> Result<ShiftOperator> {
    let g = Graph::read_edge_list(path)?;
    ShiftOperator::from_graph(&g, kind)
        .with_context(|| format!("building a {kind} shift from {}", path.display()))
}

/// Erdős–Rényi graph redrawn until the requested normalization exists.
pub fn random_shift<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: f64,
    kind: ShiftKind,
) -> Result<ShiftOperator> {
    for _ in 0..1000 {
        let g = Graph::random(rng, n, p, 0.5, 1.5);
        if let Ok(s) = ShiftOperator::from_graph(&g, kind) {
            return Ok(s);
        }
    }
    bail!("no {kind} shift on {n} nodes after 1000 draws at edge probability {p}")
}

/// A single filter given on the command line: FIR taps, or an ARMA filter
/// whose direct term is `--taps`.
#[derive(Args, Clone, Debug)]
pub struct FilterArgs {
    /// filter taps h_0,h_1,... (ARMA direct term when poles are given)
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub taps: Vec<f64>,
    /// ARMA poles γ_p
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub poles: Vec<f64>,
    /// ARMA residues β_p, one per pole
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub residues: Vec<f64>,
    /// Jacobi iterations per pole
    #[arg(long, default_value_t = 10)]
    pub jacobi_iters: usize,
}

pub enum FilterChoice {
    Fir(FirTaps),
    Arma(ArmaParams),
}

impl FilterArgs {
    pub fn build(&self) -> Result<FilterChoice> {
        if self.poles.is_empty() {
            if !self.residues.is_empty() {
                bail!("--residues needs --poles");
            }
            return Ok(FilterChoice::Fir(FirTaps::new(self.taps.clone())));
        }
        Ok(FilterChoice::Arma(ArmaParams::new(
            self.poles.clone(),
            self.residues.clone(),
            self.taps.clone(),
            self.jacobi_iters,
        )?))
    }
}

impl FilterChoice {
    pub fn response(&self) -> &dyn FrequencyResponse {
        match self {
            FilterChoice::Fir(h) => h,
            FilterChoice::Arma(p) => p,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterChoice::Fir(_) => "fir",
            FilterChoice::Arma(_) => "arma",
        }
    }
}

pub fn parse_range(v: &[f64], flag: &str) -> Result<(f64, f64)> {
    match v {
        [lo, hi] if lo.is_finite() && hi.is_finite() && lo <= hi => Ok((*lo, *hi)),
        _ => bail!("{flag} expects `lo,hi` with lo <= hi"),
    }
}

/// Inputs to hash into the manifest, skipping absent optional paths.
pub fn inputs<const N: usize>(paths: [Option<&PathBuf>; N]) -> Vec<PathBuf> {
    paths.into_iter().flatten().cloned().collect()
}
