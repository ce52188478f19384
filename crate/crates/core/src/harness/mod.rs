//! Experiment orchestration: configuration, sweeps and ensembles,
//! finite-difference references, CSV output and the command line.

pub mod cli;
pub mod config;
pub mod fit;
pub mod output;
pub mod runner;

pub use config::{Axis, Method, RawConfig, SweepConfig};
pub use fit::{fd_reference, PolynomialFit};
pub use runner::{run_ensemble, run_sweep, sweep_statistics, time_average, RunRecord, SweepRecord};
