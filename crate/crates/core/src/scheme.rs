//! The explicit upwind finite-volume stepper.
//!
//! The production update is the flux form
//!
//! ```text
//! rho_K' = rho_K - dt * sum over faces of tau_KL * (u_KL^+ rho_K - u_KL^- rho_L)
//! ```
//!
//! applied as a gather stencil over the at most `2*dim` neighbors of each
//! cell, row by row over the linear state vector. The equivalent Markov
//! (probability) form is kept as [`step_markov`] and serves as a
//! cross-check in tests; it is not on the hot path.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Boundary, CartesianMesh, Face, Side};
use crate::par;
use crate::quad;
use crate::velocity::{
    assemble_edge_fluxes, cfl_audit, EdgeFluxSet, QuadratureConfig, VelocityField,
};
use crate::Point;

/// One scalar value per cell: the discrete density at a time step.
#[derive(Debug, Clone)]
pub struct CellField {
    mesh: Arc<CartesianMesh>,
    values: Vec<f64>,
    step: usize,
}

impl CellField {
    pub fn from_values(mesh: Arc<CartesianMesh>, values: Vec<f64>, step: usize) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(Error::InvalidConfig(format!(
                "value count {} does not match cell count {}",
                values.len(),
                mesh.n_cells()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cell value {v}")));
        }
        Ok(CellField { mesh, values, step })
    }

    pub fn zeros(mesh: Arc<CartesianMesh>) -> Self {
        let n = mesh.n_cells();
        CellField {
            mesh,
            values: vec![0.0; n],
            step: 0,
        }
    }

    pub fn mesh(&self) -> &Arc<CartesianMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn set_step(&mut self, n: usize) {
        self.step = n;
    }

    /// Total mass `sum |K| rho_K`, measured with compensated summation.
    pub fn mass(&self) -> f64 {
        kahan_sum(self.values.iter().copied()) * self.mesh.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Checks that both fields live on meshes with identical geometry.
    pub fn same_mesh(&self, other: &CellField) -> bool {
        let (a, b) = (self.mesh.as_ref(), other.mesh.as_ref());
        a.dim() == b.dim()
            && a.cells_per_axis() == b.cells_per_axis()
            && a.extent() == b.extent()
            && a.boundary() == b.boundary()
    }
}

pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Discretizes an initial datum by assigning to each cell the mean of
/// `rho0` over the cell, via a tensor-product Gauss rule with
/// `quad_cfg.cell_points` points per axis. Exact for data that are
/// polynomial per cell, in particular piecewise constants aligned with
/// the mesh.
pub fn discretize_initial<F>(
    rho0: F,
    mesh: &Arc<CartesianMesh>,
    quad_cfg: &QuadratureConfig,
) -> Result<CellField>
where
    F: Fn(Point) -> f64 + Sync,
{
    let rule = quad::gauss_legendre(quad_cfg.cell_points);
    let w = mesh.widths();
    let dim = mesh.dim();
    // normalizing by the summed weights keeps aligned piecewise-constant
    // data (like the checkerboard datum) exact to the last bit
    let values = par::map_range(mesh.n_cells(), |cell| {
        let o = mesh.cell_origin(cell);
        let mut num = 0.0;
        let mut den = 0.0;
        if dim == 1 {
            for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
                num += wt * rho0([o[0] + 0.5 * w[0] * (1.0 + x), 0.0]);
                den += wt;
            }
        } else {
            for (&x1, &w1) in rule.nodes.iter().zip(&rule.weights) {
                for (&x2, &w2) in rule.nodes.iter().zip(&rule.weights) {
                    let wt = w1 * w2;
                    num += wt * rho0([o[0] + 0.5 * w[0] * (1.0 + x1), o[1] + 0.5 * w[1] * (1.0 + x2)]);
                    den += wt;
                }
            }
        }
        num / den
    });
    CellField::from_values(Arc::clone(mesh), values, 0)
}

/// Per-cell jump probabilities for one step of the associated Markov
/// chain: `p_KL = dt * tau_KL * u_KL^+` towards each neighbor, and the
/// stay probability `p_KK = 1 -` the rest, so rows sum to one exactly.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub step: usize,
    /// `p_KK` per cell.
    pub stay: Vec<f64>,
    /// `p_KL` per cell and face, indexed by [`Face::index`].
    pub out: Vec<[f64; 4]>,
}

impl TransitionTable {
    /// Identity table: every particle stays put.
    pub fn identity(n_cells: usize, step: usize) -> Self {
        TransitionTable {
            step,
            stay: vec![1.0; n_cells],
            out: vec![[0.0; 4]; n_cells],
        }
    }
}

/// Builds the transition table for one step, refusing on CFL violation.
pub fn assemble_transitions(
    fluxes: &EdgeFluxSet,
    mesh: &CartesianMesh,
    dt: f64,
) -> Result<TransitionTable> {
    let n = mesh.n_cells();
    let mut stay = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut worst = (0usize, 0.0f64);
    for cell in 0..n {
        let mut row = [0.0; 4];
        let mut s = 0.0;
        for axis in 0..mesh.dim() {
            let tau = mesh.tau_axis(axis);
            for side in [Side::Low, Side::High] {
                let f = Face { axis, side };
                let p = dt * tau * fluxes.outflow(mesh, cell, f);
                row[f.index()] = p;
                s += p;
            }
        }
        if s > worst.1 {
            worst = (cell, s);
        }
        stay.push(1.0 - s);
        out.push(row);
    }
    if worst.1 > 1.0 + 1e-12 {
        return Err(Error::CflViolation {
            cell: worst.0,
            s_max: worst.1,
        });
    }
    Ok(TransitionTable {
        step: fluxes.step,
        stay,
        out,
    })
}

/// One explicit upwind step in the flux form (production path).
pub fn step(field: &CellField, fluxes: &EdgeFluxSet, dt: f64) -> CellField {
    step_impl(field, fluxes, dt, false)
}

/// Sequential twin of [`step`], for benchmarks and determinism checks.
pub fn step_seq(field: &CellField, fluxes: &EdgeFluxSet, dt: f64) -> CellField {
    step_impl(field, fluxes, dt, true)
}

fn step_impl(field: &CellField, fluxes: &EdgeFluxSet, dt: f64, sequential: bool) -> CellField {
    let mesh = field.mesh.as_ref();
    let mut next = vec![0.0; field.values.len()];
    let [nx, _ny] = mesh.cells_per_axis();
    let chunk_len = if mesh.dim() == 1 {
        4096
    } else {
        (8192 / nx).max(1) * nx
    };
    let kernel = |chunk_idx: usize, out_chunk: &mut [f64]| {
        let start = chunk_idx * chunk_len;
        if mesh.dim() == 1 {
            step_1d_range(mesh, &field.values, fluxes, dt, start, out_chunk);
        } else {
            for (r, out_row) in out_chunk.chunks_mut(nx).enumerate() {
                step_row_2d(mesh, &field.values, fluxes, dt, start / nx + r, out_row);
            }
        }
    };
    if sequential {
        par::for_each_chunk_mut_seq(&mut next, chunk_len, kernel);
    } else {
        par::for_each_chunk_mut(&mut next, chunk_len, kernel);
    }
    CellField {
        mesh: Arc::clone(&field.mesh),
        values: next,
        step: field.step + 1,
    }
}

/// Axis-0 flux-form contribution of one cell, with explicit neighbor data.
#[inline(always)]
fn flux_acc(fe: f64, fw: f64, rho_k: f64, rho_e: f64, rho_w: f64) -> f64 {
    fe.max(0.0) * rho_k - (-fe).max(0.0) * rho_e + (-fw).max(0.0) * rho_k - fw.max(0.0) * rho_w
}

/// Wrap-aware scalar update along one axis: west/east neighbors of the
/// global column `ix` in a row starting at `base`.
#[inline]
fn axis_contribution(
    old: &[f64],
    f: &[f64],
    base: usize,
    ix: usize,
    nx: usize,
    periodic: bool,
) -> f64 {
    let k = base + ix;
    let rho_k = old[k];
    let fe = f[k];
    let (fw, rho_w) = if ix > 0 {
        (f[k - 1], old[k - 1])
    } else if periodic {
        (f[base + nx - 1], old[base + nx - 1])
    } else {
        (0.0, 0.0)
    };
    let rho_e = if ix + 1 < nx {
        old[k + 1]
    } else if periodic {
        old[base]
    } else {
        0.0 // fe is zero at a wall, value unused
    };
    flux_acc(fe, fw, rho_k, rho_e, rho_w)
}

/// Updates the cells `start .. start + out.len()` of a 1-D mesh. Interior
/// cells run over slices without branches; the two domain-boundary cells
/// take the wrap-aware path.
fn step_1d_range(
    mesh: &CartesianMesh,
    old: &[f64],
    fluxes: &EdgeFluxSet,
    dt: f64,
    start: usize,
    out: &mut [f64],
) {
    let nx = mesh.cells_per_axis()[0];
    let periodic = mesh.boundary() == Boundary::Periodic;
    let tau0 = mesh.tau_axis(0);
    let f0 = fluxes.oriented_slice(0);
    let end = start + out.len();

    let mut lo = start;
    let mut hi = end;
    if start == 0 {
        out[0] = old[0] - dt * tau0 * axis_contribution(old, f0, 0, 0, nx, periodic);
        lo += 1;
    }
    if end == nx && hi > lo {
        out[nx - 1 - start] =
            old[nx - 1] - dt * tau0 * axis_contribution(old, f0, 0, nx - 1, nx, periodic);
        hi -= 1;
    }
    if hi <= lo {
        return;
    }
    // interior: every neighbor exists, fluxes indexed directly
    let dst = &mut out[lo - start..hi - start];
    let len = dst.len();
    let rho_k = &old[lo..hi][..len];
    let rho_w = &old[lo - 1..hi - 1][..len];
    let rho_e = &old[lo + 1..hi + 1][..len];
    let fe = &f0[lo..hi][..len];
    let fw = &f0[lo - 1..hi - 1][..len];
    for i in 0..len {
        dst[i] = rho_k[i] - dt * tau0 * flux_acc(fe[i], fw[i], rho_k[i], rho_e[i], rho_w[i]);
    }
}

/// Updates one grid row of a 2-D mesh: wrap columns peeled, interior
/// columns branch-free over slices.
fn step_row_2d(
    mesh: &CartesianMesh,
    old: &[f64],
    fluxes: &EdgeFluxSet,
    dt: f64,
    iy: usize,
    out_row: &mut [f64],
) {
    let [nx, ny] = mesh.cells_per_axis();
    let periodic = mesh.boundary() == Boundary::Periodic;
    let tau0 = mesh.tau_axis(0);
    let tau1 = mesh.tau_axis(1);
    let base = iy * nx;
    let f0 = fluxes.oriented_slice(0);
    let f1 = fluxes.oriented_slice(1);

    let south = if iy > 0 {
        Some((iy - 1) * nx)
    } else if periodic {
        Some((ny - 1) * nx)
    } else {
        None
    };
    let north = if iy + 1 < ny {
        Some((iy + 1) * nx)
    } else if periodic {
        Some(0)
    } else {
        None
    };

    let vertical = |ix: usize| -> f64 {
        let k = base + ix;
        let rho_k = old[k];
        let fn_ = f1[k];
        let rho_n = match north {
            Some(nb) => old[nb + ix],
            None => 0.0, // fn_ is zero at a wall
        };
        let (fs, rho_s) = match south {
            Some(sb) => (f1[sb + ix], old[sb + ix]),
            None => (0.0, 0.0),
        };
        flux_acc(fn_, fs, rho_k, rho_n, rho_s)
    };

    // wrap columns
    for ix in [0, nx - 1] {
        let acc = tau0 * axis_contribution(old, f0, base, ix, nx, periodic) + tau1 * vertical(ix);
        out_row[ix] = old[base + ix] - dt * acc;
        if nx == 1 {
            return;
        }
    }
    if nx <= 2 {
        return;
    }
    // interior columns over slices
    let (lo, hi) = (base + 1, base + nx - 1);
    let dst = &mut out_row[1..nx - 1];
    let len = dst.len();
    let rho_k = &old[lo..hi][..len];
    let rho_w = &old[lo - 1..hi - 1][..len];
    let rho_e = &old[lo + 1..hi + 1][..len];
    let fe = &f0[lo..hi][..len];
    let fw = &f0[lo - 1..hi - 1][..len];
    let fnn = &f1[lo..hi][..len];
    let zeros: Vec<f64>;
    let (rho_n, rho_s, fs): (&[f64], &[f64], &[f64]) = match (north, south) {
        (Some(nb), Some(sb)) => (
            &old[nb + 1..nb + nx - 1],
            &old[sb + 1..sb + nx - 1],
            &f1[sb + 1..sb + nx - 1],
        ),
        (Some(nb), None) => {
            zeros = vec![0.0; len];
            (&old[nb + 1..nb + nx - 1], &zeros, &zeros)
        }
        (None, Some(sb)) => {
            zeros = vec![0.0; len];
            (&zeros, &old[sb + 1..sb + nx - 1], &f1[sb + 1..sb + nx - 1])
        }
        (None, None) => {
            zeros = vec![0.0; len];
            (&zeros, &zeros, &zeros)
        }
    };
    let (rho_n, rho_s, fs) = (&rho_n[..len], &rho_s[..len], &fs[..len]);
    for i in 0..len {
        let acc = tau0 * flux_acc(fe[i], fw[i], rho_k[i], rho_e[i], rho_w[i])
            + tau1 * flux_acc(fnn[i], fs[i], rho_k[i], rho_n[i], rho_s[i]);
        dst[i] = rho_k[i] - dt * acc;
    }
}

/// One step in the probability form `|K| rho_K' = sum_L |L| rho_L p_LK`
/// (Markov forward equation). Reference implementation used to cross-check
/// the flux form; cells are isometric so the volume ratio drops out.
pub fn step_markov(field: &CellField, table: &TransitionTable) -> CellField {
    let mesh = field.mesh.as_ref();
    let mut next = vec![0.0; field.values.len()];
    for (cell, out) in next.iter_mut().enumerate() {
        let mut v = table.stay[cell] * field.values[cell];
        for axis in 0..mesh.dim() {
            for side in [Side::Low, Side::High] {
                let f = Face { axis, side };
                if let Some(nb) = mesh.neighbor(cell, f) {
                    v += table.out[nb][f.opposite().index()] * field.values[nb];
                }
            }
        }
        *out = v;
    }
    CellField {
        mesh: Arc::clone(&field.mesh),
        values: next,
        step: field.step + 1,
    }
}

/// Drives the scheme from `init` over `n_steps` steps of size `dt`,
/// starting at time `t0`. Fluxes are assembled once for stationary fields
/// and re-assembled per step otherwise; each assembly is CFL-checked
/// before stepping. The hook observes every state, including the initial
/// one.
pub fn run_steps<H>(
    init: &CellField,
    field: &VelocityField,
    t0: f64,
    dt: f64,
    n_steps: usize,
    quad_cfg: &QuadratureConfig,
    mut hook: H,
) -> Result<CellField>
where
    H: FnMut(usize, &CellField),
{
    let mesh = init.mesh();
    let mut state = init.clone();
    hook(0, &state);
    let mut fluxes: Option<EdgeFluxSet> = None;
    for n in 0..n_steps {
        let reassemble = fluxes.is_none() || !field.stationary();
        if reassemble {
            let t_n = t0 + n as f64 * dt;
            let fx = assemble_edge_fluxes(field, mesh, n, t_n, dt, quad_cfg)?;
            let audit = cfl_audit(&fx, mesh, dt, field.sup_bound(), 1.0);
            if !audit.numeric_ok {
                return Err(Error::CflViolation {
                    cell: audit.worst_cell,
                    s_max: audit.max,
                });
            }
            fluxes = Some(fx);
        }
        state = step(&state, fluxes.as_ref().unwrap(), dt);
        state.step = init.step + n + 1;
        hook(n + 1, &state);
    }
    Ok(state)
}

/// Runs from time 0 to `t_final`, which must be an integer multiple of
/// `dt` (to relative 1e-9).
pub fn run<H>(
    init: &CellField,
    field: &VelocityField,
    dt: f64,
    t_final: f64,
    quad_cfg: &QuadratureConfig,
    hook: H,
) -> Result<CellField>
where
    H: FnMut(usize, &CellField),
{
    let steps = t_final / dt;
    let n = steps.round();
    if !(t_final > 0.0) || (steps - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "final time {t_final} is not a positive multiple of dt {dt}"
        )));
    }
    run_steps(init, field, 0.0, dt, n as usize, quad_cfg, hook)
}
