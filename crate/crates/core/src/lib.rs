//! Explicit upwind finite-volume transport on uniform Cartesian meshes.
//!
//! The crate is organized around the pipeline of a transport experiment:
//!
//! * [`mesh`] — uniform Cartesian tessellations of box domains (periodic or
//!   no-flux) in one and two dimensions,
//! * [`velocity`] — velocity fields, per-edge time-averaged fluxes and the
//!   CFL audit,
//! * [`scheme`] — initial-datum discretization and the explicit upwind
//!   stepper,
//! * [`stochastic`] — the Markov-chain sampler whose law reproduces the
//!   scheme, with martingale diagnostics,
//! * [`metrics`] — error measures between cell fields: Lᵖ, spectral Ḣ⁻¹,
//!   exact 1-D Wasserstein-1 and the logarithmic Kantorovich–Rubinstein
//!   distance via exact discrete optimal transport,
//! * [`snapshot`] — flat-binary / CSV dumps of cell fields.
//!
//! Data-parallel inner loops (cell updates, flux assembly, particle paths)
//! run on rayon when the `parallel` feature is enabled (the default) and
//! fall back to sequential loops otherwise. The sequential entry points are
//! always available for benchmarking both paths against each other.

pub mod error;
pub mod mesh;
pub mod metrics;
pub mod par;
pub mod quad;
pub mod scheme;
pub mod snapshot;
pub mod stochastic;
pub mod velocity;

pub use error::{Error, Result};
pub use mesh::{Boundary, CartesianMesh, EdgeId, Face, Side};
pub use scheme::{CellField, TransitionTable};
pub use velocity::{EdgeFluxSet, VelocityField};

/// A point (or vector) in the domain. One-dimensional meshes use the first
/// component and keep the second at zero.
pub type Point = [f64; 2];
