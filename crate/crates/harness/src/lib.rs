//! Experiment driver for the upwind transport solver.
//!
//! Reproduces the time-reversal convergence study on the unit torus and
//! the one-dimensional rough-datum optimality example, fits convergence
//! rates, runs the Markov-chain consistency checks, and serializes
//! results as CSV. The `upwind` binary exposes everything as subcommands.

pub mod config;
pub mod csvio;
pub mod mcmc;
pub mod rate;
pub mod study;

pub use config::{FieldChoice, MetricKind, OptimalityConfig, RRule, StudyConfig};
pub use csvio::{export_csv, parse_csv, ErrorRecord};
pub use mcmc::{mcmc_check, McmcConfig, McmcReport};
pub use rate::{fit_rate, RateFit};
pub use study::{convergence_study, optimality_example, SnapshotOptions, StudyResult};
