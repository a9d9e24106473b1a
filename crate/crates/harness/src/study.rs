//! The two experiment drivers: the time-reversal convergence study on the
//! unit torus and the one-dimensional rough-datum optimality example.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use upwind_core::error::{Error, Result};
use upwind_core::mesh::{Boundary, CartesianMesh};
use upwind_core::metrics::{
    difference_measures, hminus1_norm, kr_distance, l_norm_error, measure_from_field, w1_1d,
    KrConfig, LpNorm,
};
use upwind_core::scheme::{discretize_initial, run_steps, CellField};
use upwind_core::snapshot;
use upwind_core::velocity::{QuadratureConfig, VelocityField};
use upwind_core::Point;

use crate::config::{MetricKind, OptimalityConfig, StudyConfig};
use crate::csvio::ErrorRecord;
use crate::rate::{fit_rate, RateFit};

/// Optional per-step field dumps during a study.
#[derive(Debug, Clone)]
pub struct SnapshotOptions {
    pub dir: PathBuf,
    /// Dump every `every`-th state (0 disables).
    pub every: usize,
    pub binary: bool,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub metrics: Vec<MetricKind>,
    pub records: Vec<ErrorRecord>,
    /// One fit per metric, aligned with `metrics`.
    pub fits: Vec<RateFit>,
    /// Per metric: how often the error grew while the mesh was refined.
    /// Decay should be monotone; a single inversion is tolerated and
    /// anything beyond that deserves a look.
    pub inversions: Vec<usize>,
}

/// The checkerboard datum: +1 on the diagonal quarters of the unit
/// square, -1 elsewhere, extended periodically.
pub fn checkerboard(x: Point) -> f64 {
    let a = x[0] - x[0].floor();
    let b = x[1] - x[1].floor();
    if (a < 0.5) == (b < 0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Runs the time-reversal study: discretize the checkerboard datum, run
/// to the flip time, negate the field, run to the final time, and measure
/// every requested metric between the final state and the discretized
/// datum. The exact solution returns to the initial state, so the
/// discretized datum is the reference.
pub fn convergence_study(
    cfg: &StudyConfig,
    snapshots: Option<&SnapshotOptions>,
) -> Result<StudyResult> {
    cfg.validate()?;
    let quad = QuadratureConfig::default();

    let run_one = |&k: &u32| -> Result<ErrorRecord> {
        let start = Instant::now();
        let w = 2f64.powi(-(k as i32));
        let n = 1usize << k;
        let mesh = Arc::new(CartesianMesh::unit_torus(n)?);
        let dt = cfg.dt_ratio * w;
        let field = cfg.field.build();
        let reference = discretize_initial(checkerboard, &mesh, &quad)?;

        let flip = cfg.flip_time.unwrap_or(cfg.final_time);
        let steps_fwd = (flip / dt).round() as usize;
        let steps_bwd = ((cfg.final_time - flip) / dt).round() as usize;

        let mut dump = |n_step: usize, state: &CellField| {
            if let Some(opts) = snapshots {
                if opts.every > 0 && n_step % opts.every == 0 {
                    let t = n_step as f64 * dt;
                    let ext = if opts.binary { "bin" } else { "csv" };
                    let path = opts.dir.join(format!("field_h{k}_n{n_step:06}.{ext}"));
                    let res = if opts.binary {
                        snapshot::write_binary(state, t, &path)
                    } else {
                        snapshot::write_csv(state, t, &path)
                    };
                    if let Err(e) = res {
                        eprintln!("warning: snapshot dump failed: {e}");
                    }
                }
            }
        };

        let mid = run_steps(&reference, &field, 0.0, dt, steps_fwd, &quad, &mut dump)?;
        let final_state = if steps_bwd > 0 {
            let reversed = field.negated();
            run_steps(&mid, &reversed, flip, dt, steps_bwd, &quad, |n_step, state| {
                dump(steps_fwd + n_step, state)
            })?
        } else {
            mid
        };

        let mut errors = Vec::with_capacity(cfg.metrics.len());
        for metric in &cfg.metrics {
            let value = match metric {
                MetricKind::L1 => l_norm_error(&final_state, &reference, LpNorm::L1)?,
                MetricKind::L2 => l_norm_error(&final_state, &reference, LpNorm::L2)?,
                MetricKind::Hm1 => {
                    let diff: Vec<f64> = final_state
                        .values()
                        .iter()
                        .zip(reference.values())
                        .map(|(a, b)| a - b)
                        .collect();
                    let diff = CellField::from_values(Arc::clone(&mesh), diff, 0)?;
                    hminus1_norm(&diff)?
                }
                MetricKind::W1 => unreachable!("rejected by validation"),
                MetricKind::Kr => {
                    let (plus, minus) = difference_measures(&final_state, &reference)?;
                    let kr_cfg = KrConfig {
                        size_cap: cfg.kr_size_cap,
                        ..KrConfig::default()
                    };
                    kr_distance(&plus, &minus, cfg.r_rule.value(w), &kr_cfg)?.distance
                }
            };
            errors.push(value);
        }
        Ok(ErrorRecord {
            meshsize: w,
            errors,
            rate: f64::NAN,
            wall_time: start.elapsed().as_secs_f64(),
        })
    };

    let mut records = map_sweep(&cfg.exponents, run_one)?;
    finalize(&mut records, &cfg.metrics)
}

/// The rough-datum example: constant advection of `x^-s` on `(0, 1]` with
/// the half-Courant step `dt * U = w / 2`. The approximate solution is
/// cross-checked against the binomial closed form, and the error against
/// the exactly shifted datum is measured in `L1` and `W1`.
pub fn optimality_example(cfg: &OptimalityConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let quad = QuadratureConfig::default();
    let metrics = vec![MetricKind::L1, MetricKind::W1];

    let run_one = |&k: &u32| -> Result<ErrorRecord> {
        let start = Instant::now();
        let w = 2f64.powi(-(k as i32));
        // the solution translates by T*U; keep a margin of 1 on the right
        let cells = ((2.0 + cfg.final_time * cfg.velocity) / w).ceil() as usize;
        let extent = cells as f64 * w;
        let mesh = Arc::new(CartesianMesh::line(extent, cells, Boundary::NoFlux)?);
        let dt = 0.5 * w / cfg.velocity;
        let steps = (cfg.final_time / dt).round() as usize;

        // cell averages of the datum via the closed-form antiderivative
        let rho0_values = power_law_cell_averages(&mesh, cfg.s, 0.0);
        let rho0 = CellField::from_values(Arc::clone(&mesh), rho0_values, 0)?;
        let field = VelocityField::constant([cfg.velocity, 0.0]);
        let approx = run_steps(&rho0, &field, 0.0, dt, steps, &quad, |_, _| {})?;

        // independent route: binomial closed form of the half-Courant scheme
        let closed = binomial_closed_form(rho0.values(), steps);
        let scale = 1.0 + rho0.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_dev = approx
            .values()
            .iter()
            .zip(&closed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_dev > cfg.cross_check_tol * scale {
            return Err(Error::InvalidConfig(format!(
                "stepper deviates from the closed form by {max_dev:.3e} (scale {scale:.3e}) at mesh 2^-{k}"
            )));
        }

        // exact solution: the datum shifted by T*U, averaged exactly
        let exact_values = power_law_cell_averages(&mesh, cfg.s, cfg.final_time * cfg.velocity);
        let exact = CellField::from_values(Arc::clone(&mesh), exact_values, approx.step())?;

        let l1 = l_norm_error(&approx, &exact, LpNorm::L1)?;
        let w1 = w1_1d(&measure_from_field(&exact)?, &measure_from_field(&approx)?)?;
        Ok(ErrorRecord {
            meshsize: w,
            errors: vec![l1, w1],
            rate: f64::NAN,
            wall_time: start.elapsed().as_secs_f64(),
        })
    };

    let mut records = map_sweep(&cfg.exponents, run_one)?;
    finalize(&mut records, &metrics)
}

/// Cell averages of `x -> (x - shift)^-s` restricted to `(shift, shift+1]`,
/// via the antiderivative `x^(1-s) / (1-s)`; never uses quadrature, so the
/// singular first cell is exact.
pub fn power_law_cell_averages(mesh: &CartesianMesh, s: f64, shift: f64) -> Vec<f64> {
    let w = mesh.widths()[0];
    let anti = |x: f64| -> f64 {
        let y = (x - shift).clamp(0.0, 1.0);
        y.powf(1.0 - s) / (1.0 - s)
    };
    (0..mesh.n_cells())
        .map(|i| {
            let a = i as f64 * w;
            let b = a + w;
            (anti(b) - anti(a)) / w
        })
        .collect()
}

/// Evaluates the binomial closed form of the half-Courant scheme,
/// `rho_k^n = 2^-n sum_m binom(n, m) rho_{k-m}^0`, truncating the weight
/// window where the binomial tail falls below round-off.
pub fn binomial_closed_form(rho0: &[f64], n: usize) -> Vec<f64> {
    if n == 0 {
        return rho0.to_vec();
    }
    let nf = n as f64;
    let center = n / 2;
    // half-width of 9 standard deviations + margin: tail mass < 1e-17
    let half_width = (9.0 * (nf * 0.25).sqrt()).ceil() as usize + 16;
    let lo = center.saturating_sub(half_width);
    let hi = (center + half_width).min(n);

    // log-weights by compensated summation of the ratio recursion
    let mut log_w = vec![0.0f64; hi - lo + 1];
    {
        // ln binom(n, lo) - n ln 2 via sum of ln((n - lo + i) / i)
        let mut sum = -(nf) * std::f64::consts::LN_2;
        let mut comp = 0.0;
        for i in 1..=lo {
            let term = ((nf - lo as f64 + i as f64) / i as f64).ln();
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        log_w[0] = sum;
        for (idx, m) in (lo..hi).enumerate() {
            log_w[idx + 1] = log_w[idx] + ((nf - m as f64) / (m as f64 + 1.0)).ln();
        }
    }
    let weights: Vec<f64> = log_w.iter().map(|&l| l.exp()).collect();

    let cells = rho0.len();
    let values = upwind_core::par::map_range(cells, |k| {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (idx, m) in (lo..=hi).enumerate() {
            if m > k {
                break; // rho0 vanishes left of the domain
            }
            let y = weights[idx] * rho0[k - m] - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    });
    values
}

fn map_sweep<F>(exponents: &[u32], f: F) -> Result<Vec<ErrorRecord>>
where
    F: Fn(&u32) -> Result<ErrorRecord> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        exponents.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        exponents.iter().map(f).collect()
    }
}

fn finalize(records: &mut [ErrorRecord], metrics: &[MetricKind]) -> Result<StudyResult> {
    records.sort_by(|a, b| b.meshsize.partial_cmp(&a.meshsize).unwrap());
    let mut fits = Vec::with_capacity(metrics.len());
    let mut inversions = Vec::with_capacity(metrics.len());
    for (mi, _) in metrics.iter().enumerate() {
        let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.meshsize, r.errors[mi])).collect();
        let fit = if pts.iter().all(|&(_, e)| e == 0.0) {
            // the scheme was exact at every mesh size (e.g. zero field);
            // there is no rate to fit and the slope is reported as NaN
            RateFit {
                slope: f64::NAN,
                max_residual: 0.0,
                excluded: pts.len(),
            }
        } else {
            fit_rate(&pts)?
        };
        fits.push(fit);
        // records run from coarse to fine; count error increases under refinement
        inversions.push(
            pts.windows(2)
                .filter(|w| w[1].1 > w[0].1 * (1.0 + 1e-12))
                .count(),
        );
    }
    for r in records.iter_mut() {
        r.rate = fits[0].slope;
    }
    Ok(StudyResult {
        metrics: metrics.to_vec(),
        records: records.to_vec(),
        fits,
        inversions,
    })
}
