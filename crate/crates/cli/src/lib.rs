//! Library side of the `gspnn` binary: argument definitions, configuration,
//! run manifests and the subcommands.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::analyze::AnalyzeCmd;
use commands::filter::FilterCmd;
use commands::flocking::FlockingCmd;
use commands::recsys::RecsysCmd;
use config::RunConfig;
use manifest::{combined_hash, hash_inputs, OutputDir, RunManifest};

#[derive(Parser, Debug)]
#[command(
    name = "gspnn",
    version,
    about = "Graph filters and graph neural networks: experiments and analysis"
)]
pub struct Cli {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// output directory (default `out`)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// worker threads for parallel sections
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Movie rating prediction on an item similarity graph.
    Recsys {
        #[command(subcommand)]
        cmd: RecsysCmd,
    },
    /// Decentralized flocking by imitation of a centralized expert.
    Flocking {
        #[command(subcommand)]
        cmd: FlockingCmd,
    },
    /// Frequency responses, relative distances, stability and equivariance.
    Analyze {
        #[command(subcommand)]
        cmd: AnalyzeCmd,
    },
    /// Apply a single graph filter to a signal.
    Filter {
        #[command(subcommand)]
        cmd: FilterCmd,
    },
}

impl Cli {
    /// File configuration with the global flags applied.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        Ok(cfg)
    }
}

/// Execute a parsed command line and return the path of the written
/// manifest. `argv` is recorded verbatim in the manifest.
pub fn run(cli: Cli, argv: Vec<String>) -> Result<PathBuf> {
    let start = Instant::now();
    let mut cfg = cli.resolve_config()?;
    if let Some(n) = cfg.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::warn!("thread pool already initialized; --threads {n} ignored");
        }
    }
    let mut out = OutputDir::create(&cfg.out)?;
    let inputs = match &cli.command {
        Command::Recsys { cmd } => commands::recsys::run(cmd, &mut cfg, &mut out)?,
        Command::Flocking { cmd } => commands::flocking::run(cmd, &mut cfg, &mut out)?,
        Command::Analyze { cmd } => commands::analyze::run(cmd, &mut cfg, &mut out)?,
        Command::Filter { cmd } => commands::filter::run(cmd, &mut cfg, &mut out)?,
    };
    let inputs = hash_inputs(&inputs)?;
    let manifest = RunManifest {
        command: argv,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        input_hash: combined_hash(&cfg, &inputs)?,
        config: cfg,
        inputs,
        files: out.files().to_vec(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    out.finish(&manifest)
}
