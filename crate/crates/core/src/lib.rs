//! Graph signal processing and graph neural networks built from graph
//! filters.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: graphs, shift operators, signals, the graph Fourier transform
//! - [`filters`]: FIR, ARMA and edge-varying graph filters
//! - [`neural`]: graph perceptrons and multi-layer GCNN / ARMANet / EdgeNet
//!   models with reverse-mode gradients
//! - [`optim`]: losses, ADAM and the mini-batch training loop
//! - [`analysis`]: relative distance, integral Lipschitz constants and
//!   stability experiments
//! - [`recsys`], [`flocking`]: the two application pipelines

pub mod analysis;
pub mod error;
pub mod filters;
pub mod flocking;
pub mod graph;
pub mod linalg;
pub mod neural;
pub mod optim;
pub mod recsys;

pub use error::{Error, Result};
pub use graph::{Graph, GraphSignal, Permutation, ShiftKind, ShiftOperator};
