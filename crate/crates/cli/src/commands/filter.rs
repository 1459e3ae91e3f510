use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Subcommand, ValueEnum};
use gspnn_core::filters::{arma_apply_direct, arma_apply_jacobi, fir_apply};
use gspnn_core::{GraphSignal, ShiftKind};

use super::{load_shift, require_file, FilterArgs, FilterChoice};
use crate::config::RunConfig;
use crate::manifest::OutputDir;

#[derive(Subcommand, Clone, Debug)]
pub enum FilterCmd {
    /// Filter a signal on a graph and write the output signal.
    Apply {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        shift_kind: Option<ShiftKind>,
        /// CSV with one row per node and one column per feature
        #[arg(long)]
        signal: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        /// how ARMA filters are evaluated
        #[arg(long, value_enum, default_value_t = ArmaMode::Jacobi)]
        arma: ArmaMode,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ArmaMode {
    Jacobi,
    Direct,
}

/// Comma-separated rows of numbers; blank lines and `#` comments skipped.
pub fn read_signal(path: &Path) -> Result<GraphSignal> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let row = content
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{}: not a row of numbers", path.display(), i + 1))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!(
                    "{}:{}: expected {} columns, got {}",
                    path.display(),
                    i + 1,
                    first.len(),
                    row.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} holds no signal values", path.display());
    }
    let (n, f) = (rows.len(), rows[0].len());
    let values = ndarray::Array2::from_shape_vec((n, f), rows.into_iter().flatten().collect())?;
    Ok(GraphSignal::new(values)?)
}

pub fn write_signal<W: Write>(mut w: W, x: &GraphSignal) -> std::io::Result<()> {
    for row in x.view().rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn run(cmd: &FilterCmd, cfg: &mut RunConfig, out: &mut OutputDir) -> Result<Vec<PathBuf>> {
    match cmd {
        FilterCmd::Apply {
            graph,
            shift_kind,
            signal,
            filter,
            arma,
        } => {
            require_file(graph, "graph")?;
            require_file(signal, "signal")?;
            if let Some(k) = shift_kind {
                cfg.analysis.shift_kind = *k;
            }
            let s = load_shift(graph, cfg.analysis.shift_kind)?;
            let x = read_signal(signal)?;
            let y = match (filter.build()?, arma) {
                (FilterChoice::Fir(h), _) => fir_apply(&h, &s, &x)?,
                (FilterChoice::Arma(p), ArmaMode::Jacobi) => arma_apply_jacobi(&p, &s, &x)?,
                (FilterChoice::Arma(p), ArmaMode::Direct) => arma_apply_direct(&p, &s, &x)?,
            };
            let mut w = out.writer("output.csv")?;
            write_signal(&mut w, &y)?;
            w.flush()?;
            Ok(vec![graph.clone(), signal.clone()])
        }
    }
}
