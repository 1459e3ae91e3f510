//! Run configuration: a TOML file with one table per subsystem. Every table
//! rejects unknown keys, and missing keys take the defaults below. Command
//! line flags are applied on top of the file.

use std::fmt;
use std::path::{Path, PathBuf};

use gspnn_core::flocking::FlockingConfig;
use gspnn_core::neural::Nonlinearity;
use gspnn_core::optim::TrainConfig;
use gspnn_core::recsys::RecsysConfig;
use gspnn_core::ShiftKind;
use serde::{Deserialize, Serialize};

pub const DATA_DIR_ENV: &str = "GSPNN_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// directory holding `u.data`; falls back to `$GSPNN_DATA_DIR`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    pub recsys: RecsysConfig,
    pub flocking: FlockingConfig,
    pub controller: ControllerConfig,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            data_dir: None,
            recsys: RecsysConfig::default(),
            flocking: FlockingConfig::default(),
            controller: ControllerConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

/// Flocking controller architecture, imitation training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub n_trajectories: usize,
    pub n_agents: usize,
    pub features: usize,
    pub order: usize,
    pub nonlinearity: Nonlinearity,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// rollouts per team size in `evaluate` and `sweep`
    pub eval_trials: usize,
    /// held-out initial conditions are drawn from `seed + eval_seed_offset`
    pub eval_seed_offset: u64,
    pub sizes: Vec<usize>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            n_trajectories: 100,
            n_agents: 25,
            features: 32,
            order: 3,
            nonlinearity: Nonlinearity::Tanh,
            epochs: 40,
            batch_size: 20,
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eval_trials: 20,
            eval_seed_offset: 10_000,
            sizes: vec![25, 31, 37, 44, 50],
        }
    }
}

impl ControllerConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            seed,
            shuffle: true,
        }
    }
}

/// Random instances for the `analyze` commands when no graph or checkpoint
/// is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub n_nodes: usize,
    pub edge_probability: f64,
    pub shift_kind: ShiftKind,
    pub order: usize,
    pub layers: usize,
    /// hidden width of the random equivariance models
    pub features: usize,
    pub inputs: usize,
    pub trials: usize,
    pub grid_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            n_nodes: 16,
            edge_probability: 0.3,
            shift_kind: ShiftKind::NormalizedAdjacency,
            order: 3,
            layers: 2,
            features: 4,
            inputs: 20,
            trials: 50,
            grid_points: gspnn_core::analysis::DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    /// dotted key path, empty at the top level
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}: ", p.display())?;
        }
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "key `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError {
            path: None,
            key: String::new(),
            message: e.message().to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError {
                path: None,
                key: if key == "." { String::new() } else { key },
                message: e.into_inner().message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            key: String::new(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            ..e
        })
    }

    /// `data_dir`, else `$GSPNN_DATA_DIR`.
    pub fn resolved_data_dir(&self) -> Option<PathBuf> {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
        let c = RunConfig::from_toml_str("seed = 4\n[recsys]\nepochs = 3\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.recsys.epochs, 3);
        assert_eq!(c.recsys.batch_size, 5);
        assert_eq!(c.controller.learning_rate, 5e-4);
    }

    #[test]
    fn misspelled_key_is_named() {
        let e = RunConfig::from_toml_str("[recsys]\nepoch = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("recsys"), "{msg}");
        assert!(msg.contains("epoch"), "{msg}");
        let e = RunConfig::from_toml_str("sed = 1\n").unwrap_err();
        assert!(e.to_string().contains("sed"), "{e}");
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let e = RunConfig::from_toml_str("[controller]\nepochs = \"many\"\n").unwrap_err();
        assert_eq!(e.key, "controller.epochs");
        let e = RunConfig::from_toml_str("[analysis]\nshift_kind = \"bogus\"\n").unwrap_err();
        assert_eq!(e.key, "analysis.shift_kind");
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig {
            threads: Some(2),
            ..RunConfig::default()
        };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }
}
