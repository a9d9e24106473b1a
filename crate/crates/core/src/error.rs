//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("point ({0}, {1}) lies outside the no-flux domain")]
    OutsideDomain(f64, f64),

    #[error("CFL violation: cell {cell} has outflow sum {s_max:.6} > 1; reduce the time step")]
    CflViolation { cell: usize, s_max: f64 },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("operation requires a periodic mesh")]
    RequiresPeriodic,

    #[error("field mean {mean:.3e} is not negligible against its L1 norm {l1_norm:.3e}; the zero mode must vanish")]
    NonZeroMean { mean: f64, l1_norm: f64 },

    #[error("measures differ in total mass: {0:.12e} vs {1:.12e}")]
    MassMismatch(f64, f64),

    #[error(
        "transport instance too large: {points} support points exceed the cap of {cap}; \
         use the coupling upper bound instead"
    )]
    SizeCapExceeded { points: usize, cap: usize },

    #[error("transport solve did not terminate (pivot limit {0} reached)")]
    SolverStalled(usize),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
