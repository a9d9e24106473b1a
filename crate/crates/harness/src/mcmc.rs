//! Markov-chain consistency checks bundled for the CLI and the acceptance
//! suite: the hard increment bound, the empirical cell-law comparison,
//! the martingale sup-scaling sweep, and the second-moment constant.

use std::sync::Arc;

use upwind_core::error::Result;
use upwind_core::mesh::CartesianMesh;
use upwind_core::scheme::{discretize_initial, run_steps, CellField};
use upwind_core::stochastic::{
    empirical_law_check, martingale_scaling, simulate, LawCheckConfig, LawReport, ScalingFit,
    SimConfig,
};
use upwind_core::velocity::QuadratureConfig;

use crate::config::FieldChoice;

#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub field: FieldChoice,
    /// Cells per axis of the law-check torus.
    pub law_mesh: usize,
    pub law_steps: usize,
    pub law_particles: usize,
    /// Mesh exponents of the sup-scaling sweep (`h = 2^-k`, `T = 1`).
    pub scaling_exponents: Vec<u32>,
    pub scaling_particles: usize,
    pub dt_ratio: f64,
    pub seed: u64,
    pub dump_positions: Option<std::path::PathBuf>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            field: FieldChoice::Constant([0.0, 1.0]),
            law_mesh: 8,
            law_steps: 16,
            law_particles: 1_000_000,
            scaling_exponents: (4..=8).collect(),
            scaling_particles: 100_000,
            dt_ratio: 0.25,
            seed: 0,
            dump_positions: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McmcReport {
    /// Largest observed `|xi|` against the hard bound `4h`.
    pub max_increment: f64,
    pub increment_bound: f64,
    pub increment_ok: bool,
    pub law: LawReport,
    /// `E[sup |M|]` per sweep mesh size.
    pub scaling_points: Vec<(f64, f64)>,
    pub scaling_slope: Option<f64>,
    pub scaling_ok: bool,
    /// Observed constant in `E[|xi|^2] <= C dt sup|u| h` over all runs.
    pub moment_constant: f64,
    pub pass: bool,
}

pub fn mcmc_check(cfg: &McmcConfig) -> Result<McmcReport> {
    let quad = QuadratureConfig::default();
    let field = cfg.field.build();

    // law check on a small torus with a nonuniform nonnegative datum
    let mesh = Arc::new(CartesianMesh::unit_torus(cfg.law_mesh)?);
    let datum = |x: upwind_core::Point| 1.0 + crate::study::checkerboard(x);
    let rho0 = discretize_initial(datum, &mesh, &quad)?;
    let dt = cfg.dt_ratio * mesh.widths()[0];

    let mut trajectory: Vec<CellField> = Vec::with_capacity(cfg.law_steps + 1);
    run_steps(&rho0, &field, 0.0, dt, cfg.law_steps, &quad, |_, state| {
        trajectory.push(state.clone());
    })?;

    let mut sim_cfg = SimConfig::new(cfg.law_particles, cfg.law_steps, dt, cfg.seed);
    sim_cfg.record_cell_law = true;
    sim_cfg.dump_positions = cfg.dump_positions.clone();
    let sim = simulate(&rho0, &field, &sim_cfg, &quad)?;
    let law = empirical_law_check(&sim, &trajectory, &LawCheckConfig::default())?;

    let mut max_increment = sim.max_increment;
    let mut increment_bound = 4.0 * mesh.h();
    let mut increment_ok = max_increment <= increment_bound;
    let mut moment_constant = observed_moment_constant(&sim, dt, field.sup_bound(), mesh.h());

    // sup-scaling sweep at T = 1
    let mut scaling_points = Vec::with_capacity(cfg.scaling_exponents.len());
    for &k in &cfg.scaling_exponents {
        let n = 1usize << k;
        let mesh_k = Arc::new(CartesianMesh::unit_torus(n)?);
        let w = mesh_k.widths()[0];
        let dt_k = cfg.dt_ratio * w;
        let steps = (1.0 / dt_k).round() as usize;
        let rho0_k = discretize_initial(datum, &mesh_k, &quad)?;
        let sim_cfg = SimConfig::new(cfg.scaling_particles, steps, dt_k, cfg.seed ^ k as u64);
        let out = simulate(&rho0_k, &field, &sim_cfg, &quad)?;
        let mean_sup: f64 =
            out.sup_abs_martingale.iter().sum::<f64>() / out.sup_abs_martingale.len() as f64;
        scaling_points.push((mesh_k.h(), mean_sup));
        let bound_k = 4.0 * mesh_k.h();
        if out.max_increment > bound_k {
            increment_ok = false;
        }
        if out.max_increment > max_increment {
            max_increment = out.max_increment;
            increment_bound = bound_k;
        }
        moment_constant =
            moment_constant.max(observed_moment_constant(&out, dt_k, field.sup_bound(), mesh_k.h()));
    }
    let (scaling_slope, scaling_ok) = match martingale_scaling(&scaling_points)? {
        ScalingFit::Degenerate => (None, true),
        ScalingFit::Fitted { slope, .. } => (Some(slope), (0.4..=0.6).contains(&slope)),
    };

    let pass = increment_ok && law.pass && scaling_ok;
    Ok(McmcReport {
        max_increment,
        increment_bound,
        increment_ok,
        law,
        scaling_points,
        scaling_slope,
        scaling_ok,
        moment_constant,
        pass,
    })
}

fn observed_moment_constant(
    sim: &upwind_core::stochastic::SimOutput,
    dt: f64,
    sup: f64,
    h: f64,
) -> f64 {
    sim.mean_increment_sq
        .iter()
        .fold(0.0f64, |m, &v| m.max(v / (dt * sup * h)))
}
