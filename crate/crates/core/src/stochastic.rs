//! Markov-chain reading of the upwind scheme: continuous-state random
//! characteristics under the jump kernel, martingale increments, and
//! statistical checks of the chain's law against the scheme.
//!
//! Randomness is counter-based: every uniform is a pure function of
//! `(seed, particle, step, draw)`, so particle `i`'s path never depends on
//! the ensemble size or the execution order. Particles are simulated in
//! fixed blocks whose partial aggregates are combined in block order,
//! which keeps results identical between the parallel and sequential
//! paths and across thread counts.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Boundary, CartesianMesh, Face};
use crate::par;
use crate::scheme::{assemble_transitions, CellField, TransitionTable};
use crate::velocity::{assemble_edge_fluxes, net_flows, QuadratureConfig, VelocityField};
use crate::Point;

/// Step index reserved for initialization draws.
const INIT_STEP: u32 = (1 << 24) - 1;
const MAX_STEPS: usize = (1 << 24) - 2;

/// Stateless counter-based generator: one u64 per (particle, step, draw).
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    fn mix64(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn raw(&self, particle: u64, step: u32, draw: u32) -> u64 {
        debug_assert!(particle < 1 << 32);
        debug_assert!(step < 1 << 24);
        debug_assert!(draw < 1 << 8);
        let key = (particle << 32) | ((step as u64) << 8) | draw as u64;
        let z = self.seed ^ key.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Self::mix64(Self::mix64(z) ^ key)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&self, particle: u64, step: u32, draw: u32) -> f64 {
        (self.raw(particle, step, draw) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Draw stream for one (particle, step).
    pub fn stream(&self, particle: u64, step: u32) -> CounterStream<'_> {
        CounterStream {
            rng: self,
            particle,
            step,
            next: 0,
        }
    }
}

/// Source of uniform variates; implemented by [`CounterStream`] and easy
/// to provide from any other generator in tests.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;
}

pub struct CounterStream<'a> {
    rng: &'a CounterRng,
    particle: u64,
    step: u32,
    next: u32,
}

impl UniformSource for CounterStream<'_> {
    fn next_uniform(&mut self) -> f64 {
        let d = self.next;
        self.next += 1;
        self.rng.uniform(self.particle, self.step, d)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JumpResult {
    /// New position, wrapped into the domain.
    pub position: Point,
    pub cell: usize,
    /// Unwrapped displacement of this step (the physical jump vector).
    pub displacement: Point,
}

/// One jump of the chain from a located state: with probability `p_KK`
/// the particle stays exactly where it is (the kernel's atom), otherwise
/// it lands uniformly in the selected neighbor cell.
pub fn jump_in_cell(
    position: Point,
    cell: usize,
    table: &TransitionTable,
    mesh: &CartesianMesh,
    draws: &mut impl UniformSource,
) -> JumpResult {
    let u = draws.next_uniform();
    let mut acc = table.stay[cell];
    if u >= acc {
        let w = mesh.widths();
        for face_idx in 0..2 * mesh.dim() {
            let p = table.out[cell][face_idx];
            if p <= 0.0 {
                continue;
            }
            if u < acc + p {
                let face = Face::from_index(face_idx);
                let nb = mesh
                    .neighbor(cell, face)
                    .expect("positive jump probability through a wall");
                // neighbor box in unwrapped coordinates adjacent to the
                // current cell, so the displacement is the physical one
                let mut origin = mesh.cell_origin(cell);
                origin[face.axis] += match face.side {
                    crate::mesh::Side::High => w[face.axis],
                    crate::mesh::Side::Low => -w[face.axis],
                };
                let mut target = [0.0, 0.0];
                for (a, t) in target.iter_mut().enumerate().take(mesh.dim()) {
                    *t = origin[a] + w[a] * draws.next_uniform();
                }
                let displacement = [target[0] - position[0], target[1] - position[1]];
                let position = match mesh.boundary() {
                    Boundary::Periodic => mesh.wrap(target),
                    Boundary::NoFlux => target,
                };
                return JumpResult {
                    position,
                    cell: nb,
                    displacement,
                };
            }
            acc += p;
        }
        // round-off leftover beyond the accumulated row sum: stay
    }
    JumpResult {
        position,
        cell,
        displacement: [0.0, 0.0],
    }
}

/// Convenience wrapper that locates the particle's cell first.
pub fn jump(
    position: Point,
    table: &TransitionTable,
    mesh: &CartesianMesh,
    draws: &mut impl UniformSource,
) -> Result<JumpResult> {
    let cell = mesh.locate_cell(position)?;
    Ok(jump_in_cell(position, cell, table, mesh, draws))
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub particles: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    /// Record per-step cell-mass histograms (for the law check).
    pub record_cell_law: bool,
    /// Record per-(step, cell) increment statistics (for the conditional
    /// centering check; meant for small runs).
    pub record_centering: bool,
    /// Particles per deterministic reduction block.
    pub block: usize,
    /// Dump every particle position after every step to a flat binary
    /// file (magic `UPWP`, `u32` dim, `u64` particles, `u64` states, then
    /// `particles * dim` little-endian `f64` per state, initial state
    /// first).
    pub dump_positions: Option<std::path::PathBuf>,
}

impl SimConfig {
    pub fn new(particles: usize, steps: usize, dt: f64, seed: u64) -> Self {
        SimConfig {
            particles,
            steps,
            dt,
            seed,
            record_cell_law: false,
            record_centering: false,
            block: 4096,
            dump_positions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ParticleState {
    pos: Point,
    mart: Point,
    sup: f64,
    cell: u32,
}

/// Per-cell increment statistics for one step.
#[derive(Debug, Clone, Copy, Default)]
pub struct CellIncrements {
    pub count: u64,
    pub sum: Point,
    pub sum_sq: Point,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    /// Mass carried by each particle.
    pub weight: f64,
    pub final_positions: Vec<Point>,
    pub final_cells: Vec<u32>,
    /// Mass histogram per state 0..=steps (present when recorded).
    pub histograms: Option<Vec<Vec<f64>>>,
    /// Per-particle running supremum of `|M_k|`.
    pub sup_abs_martingale: Vec<f64>,
    /// Largest single increment `|xi|` over the whole simulation.
    pub max_increment: f64,
    /// Mean of `|xi|^2` per step.
    pub mean_increment_sq: Vec<f64>,
    /// Per-step, per-cell increment statistics (when recorded).
    pub centering: Option<Vec<Vec<CellIncrements>>>,
}

/// Runs the continuous-state chain started from the discretized density:
/// cells are sampled proportionally to `|K| rho_K`, positions uniformly
/// within the cell. Requires a nonnegative initial field.
pub fn simulate(
    rho0: &CellField,
    field: &VelocityField,
    cfg: &SimConfig,
    quad_cfg: &QuadratureConfig,
) -> Result<SimOutput> {
    let mesh = Arc::clone(rho0.mesh());
    if rho0.min() < 0.0 {
        return Err(Error::InvalidConfig(
            "probabilistic interpretation requires a nonnegative initial field".into(),
        ));
    }
    if cfg.steps > MAX_STEPS {
        return Err(Error::InvalidConfig(format!("too many steps: {}", cfg.steps)));
    }
    if cfg.particles == 0 || cfg.particles >= u32::MAX as usize {
        return Err(Error::InvalidConfig("particle count out of range".into()));
    }
    let total_mass = rho0.mass();
    if !(total_mass > 0.0) {
        return Err(Error::InvalidConfig("initial field must carry positive mass".into()));
    }
    let weight = total_mass / cfg.particles as f64;
    let rng = CounterRng::new(cfg.seed);

    // cumulative cell-mass distribution (volumes are uniform)
    let mut cum: Vec<f64> = Vec::with_capacity(mesh.n_cells());
    let mut acc = 0.0;
    for &v in rho0.values() {
        acc += v.max(0.0);
        cum.push(acc);
    }
    let norm = acc;
    let w = mesh.widths();
    let dim = mesh.dim();

    let mut states: Vec<ParticleState> = vec![ParticleState::default(); cfg.particles];
    par::for_each_chunk_mut(&mut states, cfg.block, |chunk_idx, chunk| {
        for (off, st) in chunk.iter_mut().enumerate() {
            let pid = (chunk_idx * cfg.block + off) as u64;
            let u = rng.uniform(pid, INIT_STEP, 0) * norm;
            let cell = cum.partition_point(|&c| c <= u).min(mesh.n_cells() - 1);
            let o = mesh.cell_origin(cell);
            let mut pos = [0.0, 0.0];
            for a in 0..dim {
                pos[a] = o[a] + w[a] * rng.uniform(pid, INIT_STEP, 1 + a as u32);
            }
            st.pos = pos;
            st.cell = cell as u32;
        }
    });

    let n_cells = mesh.n_cells();
    let mut histograms: Option<Vec<Vec<f64>>> = cfg.record_cell_law.then(Vec::new);
    if let Some(h) = histograms.as_mut() {
        h.push(mass_histogram(&states, n_cells, weight));
    }
    let mut dump = match cfg.dump_positions.as_ref() {
        Some(path) => {
            use std::io::Write;
            let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
            w.write_all(b"UPWP")?;
            w.write_all(&(dim as u32).to_le_bytes())?;
            w.write_all(&(cfg.particles as u64).to_le_bytes())?;
            w.write_all(&((cfg.steps + 1) as u64).to_le_bytes())?;
            Some(w)
        }
        None => None,
    };
    let dump_state = |states: &[ParticleState],
                          dump: &mut Option<std::io::BufWriter<std::fs::File>>|
     -> Result<()> {
        if let Some(w) = dump.as_mut() {
            use std::io::Write;
            for s in states {
                for a in 0..dim {
                    w.write_all(&s.pos[a].to_le_bytes())?;
                }
            }
        }
        Ok(())
    };
    dump_state(&states, &mut dump)?;
    let mut centering: Option<Vec<Vec<CellIncrements>>> = cfg.record_centering.then(Vec::new);
    let mut mean_increment_sq = Vec::with_capacity(cfg.steps);
    let mut max_increment = 0.0f64;

    // stationary fields reuse one table and one net-flow vector
    let mut table: Option<TransitionTable> = None;
    let mut drift: Option<Vec<Point>> = None;

    for n in 0..cfg.steps {
        if table.is_none() || !field.stationary() {
            let t_n = n as f64 * cfg.dt;
            let fluxes = assemble_edge_fluxes(field, &mesh, n, t_n, cfg.dt, quad_cfg)?;
            table = Some(assemble_transitions(&fluxes, &mesh, cfg.dt)?);
            drift = Some(net_flows(&fluxes, &mesh));
        }
        let table_n = table.as_ref().unwrap();
        let drift_n = drift.as_ref().unwrap();

        // per-block partials: (histogram, centering, sum |xi|^2, max |xi|)
        struct Partial {
            hist: Option<Vec<f64>>,
            centering: Option<Vec<CellIncrements>>,
            sum_xi_sq: f64,
            max_xi: f64,
        }
        let record_hist = cfg.record_cell_law;
        let record_cent = cfg.record_centering;
        let dt = cfg.dt;

        let n_blocks = cfg.particles.div_ceil(cfg.block);
        let partials: Vec<Partial> = {
            // split states into disjoint block slices, processed in parallel
            let slices: Vec<&mut [ParticleState]> = states.chunks_mut(cfg.block).collect();
            let process = |(b, chunk): (usize, &mut [ParticleState])| -> Partial {
                let mut hist = record_hist.then(|| vec![0.0f64; n_cells]);
                let mut cent = record_cent.then(|| vec![CellIncrements::default(); n_cells]);
                let mut sum_xi_sq = 0.0;
                let mut max_xi = 0.0f64;
                for (off, st) in chunk.iter_mut().enumerate() {
                    let pid = (b * cfg.block + off) as u64;
                    let cell_before = st.cell as usize;
                    let mut draws = rng.stream(pid, n as u32);
                    let jr = jump_in_cell(st.pos, cell_before, table_n, &mesh, &mut draws);
                    let u_h = drift_n[cell_before];
                    let xi = [
                        jr.displacement[0] - dt * u_h[0],
                        jr.displacement[1] - dt * u_h[1],
                    ];
                    let xi_norm_sq = xi[0] * xi[0] + xi[1] * xi[1];
                    sum_xi_sq += xi_norm_sq;
                    max_xi = max_xi.max(xi_norm_sq.sqrt());
                    st.mart[0] += xi[0];
                    st.mart[1] += xi[1];
                    let m_abs = (st.mart[0] * st.mart[0] + st.mart[1] * st.mart[1]).sqrt();
                    st.sup = st.sup.max(m_abs);
                    st.pos = jr.position;
                    st.cell = jr.cell as u32;
                    if let Some(h) = hist.as_mut() {
                        h[jr.cell] += weight;
                    }
                    if let Some(c) = cent.as_mut() {
                        let e = &mut c[cell_before];
                        e.count += 1;
                        e.sum[0] += xi[0];
                        e.sum[1] += xi[1];
                        e.sum_sq[0] += xi[0] * xi[0];
                        e.sum_sq[1] += xi[1] * xi[1];
                    }
                }
                Partial {
                    hist,
                    centering: cent,
                    sum_xi_sq,
                    max_xi,
                }
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                slices.into_par_iter().enumerate().map(process).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                slices.into_iter().enumerate().map(process).collect()
            }
        };
        debug_assert_eq!(partials.len(), n_blocks);

        // deterministic combination in block order
        let mut sum_xi_sq = 0.0;
        let mut hist = record_hist.then(|| vec![0.0f64; n_cells]);
        let mut cent = record_cent.then(|| vec![CellIncrements::default(); n_cells]);
        for p in partials {
            sum_xi_sq += p.sum_xi_sq;
            max_increment = max_increment.max(p.max_xi);
            if let (Some(h), Some(ph)) = (hist.as_mut(), p.hist.as_ref()) {
                for (a, b) in h.iter_mut().zip(ph) {
                    *a += b;
                }
            }
            if let (Some(c), Some(pc)) = (cent.as_mut(), p.centering.as_ref()) {
                for (a, b) in c.iter_mut().zip(pc) {
                    a.count += b.count;
                    a.sum[0] += b.sum[0];
                    a.sum[1] += b.sum[1];
                    a.sum_sq[0] += b.sum_sq[0];
                    a.sum_sq[1] += b.sum_sq[1];
                }
            }
        }
        mean_increment_sq.push(sum_xi_sq / cfg.particles as f64);
        if let (Some(hs), Some(h)) = (histograms.as_mut(), hist) {
            hs.push(h);
        }
        if let (Some(cs), Some(c)) = (centering.as_mut(), cent) {
            cs.push(c);
        }
        dump_state(&states, &mut dump)?;
    }
    if let Some(mut w) = dump {
        use std::io::Write;
        w.flush()?;
    }

    Ok(SimOutput {
        weight,
        final_positions: states.iter().map(|s| s.pos).collect(),
        final_cells: states.iter().map(|s| s.cell).collect(),
        histograms,
        sup_abs_martingale: states.iter().map(|s| s.sup).collect(),
        max_increment,
        mean_increment_sq,
        centering,
    })
}

fn mass_histogram(states: &[ParticleState], n_cells: usize, weight: f64) -> Vec<f64> {
    let mut h = vec![0.0; n_cells];
    for s in states {
        h[s.cell as usize] += weight;
    }
    h
}

#[derive(Debug, Clone)]
pub struct LawCheckConfig {
    /// TV tolerance factor: `tol = factor * sqrt(cells / particles)`.
    pub tv_factor: f64,
    /// Cells per step subjected to the per-cell binomial band.
    pub binomial_cells: usize,
    /// Width of the binomial band in standard deviations.
    pub binomial_sigmas: f64,
    /// Seed for the random cell subset.
    pub seed: u64,
}

impl Default for LawCheckConfig {
    fn default() -> Self {
        LawCheckConfig {
            tv_factor: 5.0,
            binomial_cells: 8,
            binomial_sigmas: 4.0,
            seed: 0x6c61_775f_6368_6563,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepLawReport {
    pub step: usize,
    /// Total-variation distance between the normalized histogram and the
    /// scheme's cell masses.
    pub tv: f64,
    pub tolerance: f64,
    pub tv_ok: bool,
    pub binomial_failures: usize,
}

#[derive(Debug, Clone)]
pub struct LawReport {
    pub per_step: Vec<StepLawReport>,
    pub pass: bool,
}

/// Compares the empirical cell-mass histogram of the ensemble with the
/// scheme trajectory `|K| rho_K^n`, step by step.
pub fn empirical_law_check(
    sim: &SimOutput,
    trajectory: &[CellField],
    cfg: &LawCheckConfig,
) -> Result<LawReport> {
    let Some(histograms) = sim.histograms.as_ref() else {
        return Err(Error::InvalidConfig(
            "simulation was run without cell-law recording".into(),
        ));
    };
    if histograms.len() != trajectory.len() {
        return Err(Error::InvalidConfig(format!(
            "trajectory length {} does not match recorded steps {}",
            trajectory.len(),
            histograms.len()
        )));
    }
    let n_cells = trajectory[0].mesh().n_cells();
    if histograms[0].len() != n_cells {
        return Err(Error::MeshMismatch);
    }
    let particles = sim.sup_abs_martingale.len();
    let total_mass = trajectory[0].mass();
    let rng = CounterRng::new(cfg.seed);

    let mut per_step = Vec::with_capacity(histograms.len());
    let mut pass = true;
    for (n, (hist, field)) in histograms.iter().zip(trajectory).enumerate() {
        let vol = field.mesh().cell_volume();
        let mut tv = 0.0;
        for (h, &v) in hist.iter().zip(field.values()) {
            tv += (h / total_mass - vol * v / total_mass).abs();
        }
        tv *= 0.5;
        let tolerance = cfg.tv_factor * (n_cells as f64 / particles as f64).sqrt();
        let tv_ok = tv <= tolerance;

        let mut binomial_failures = 0;
        for k in 0..cfg.binomial_cells.min(n_cells) {
            let cell =
                (rng.raw(n as u64, INIT_STEP - 1, k as u32) % n_cells as u64) as usize;
            let p = (vol * field.values()[cell] / total_mass).clamp(0.0, 1.0);
            let count = hist[cell] / sim.weight;
            let expected = particles as f64 * p;
            let sigma = (particles as f64 * p * (1.0 - p)).sqrt();
            if (count - expected).abs() > cfg.binomial_sigmas * sigma + 2.0 {
                binomial_failures += 1;
            }
        }
        if !tv_ok || binomial_failures > 0 {
            pass = false;
        }
        per_step.push(StepLawReport {
            step: n,
            tv,
            tolerance,
            tv_ok,
            binomial_failures,
        });
    }
    Ok(LawReport { per_step, pass })
}

/// Result of the martingale sup-scaling fit across a mesh sweep.
#[derive(Debug, Clone)]
pub enum ScalingFit {
    /// All supremum estimates vanish (e.g. zero velocity field).
    Degenerate,
    Fitted {
        /// Least-squares slope of `log E[sup |M|]` against `log h`.
        slope: f64,
        /// The fitted points `(h, E[sup |M|])`.
        points: Vec<(f64, f64)>,
    },
}

/// Fits the scaling exponent of `E[sup_k |M_k|]` in the mesh size from
/// per-sweep estimates `(h, mean sup)`.
pub fn martingale_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidConfig(
            "martingale scaling needs at least 3 sweep points".into(),
        ));
    }
    if points.iter().any(|&(_, s)| s == 0.0) {
        return Ok(ScalingFit::Degenerate);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(h, s)| (h.ln(), s.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(ScalingFit::Fitted {
        slope: sxy / sxx,
        points: points.to_vec(),
    })
}
