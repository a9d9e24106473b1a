//! Spectral homogeneous `H^-1` norm of mean-zero fields on periodic
//! meshes.
//!
//! A cell field is piecewise constant, so its Fourier transform is known
//! exactly: the DFT of the cell values times the per-axis factor
//! `w_a * sinc(k_a w_a / 2)` (the transform of a cell indicator). The norm
//! sums `|k|^-2 |F(k)|^2` over the modes resolvable by the grid
//! (`|k_a| <= pi / w_a`, one per DFT bin with the Nyquist bin counted
//! once) and excludes `k = 0`, whose coefficient must be negligible.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::mesh::Boundary;
use crate::scheme::{kahan_sum, CellField};

pub fn hminus1_norm(diff: &CellField) -> Result<f64> {
    let mesh = diff.mesh();
    if mesh.boundary() != Boundary::Periodic {
        return Err(Error::RequiresPeriodic);
    }
    let vol = mesh.cell_volume();
    let l1: f64 = kahan_sum(diff.values().iter().map(|v| v.abs())) * vol;
    if l1 == 0.0 {
        return Ok(0.0);
    }
    let mean: f64 = kahan_sum(diff.values().iter().copied()) * vol;
    if mean.abs() > 1e-9 * l1 {
        return Err(Error::NonZeroMean { mean, l1_norm: l1 });
    }

    let [nx, ny] = mesh.cells_per_axis();
    let dim = mesh.dim();
    let ext = mesh.extent();
    let w = mesh.widths();

    let mut data: Vec<Complex<f64>> = diff
        .values()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    fft_2d(&mut data, nx, if dim == 2 { ny } else { 1 });

    let two_pi = 2.0 * std::f64::consts::PI;
    let signed = |m: usize, n: usize| -> f64 {
        if m <= n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        }
    };

    let mut sum = 0.0;
    let my_range = if dim == 2 { ny } else { 1 };
    for my in 0..my_range {
        let m1 = if dim == 2 { signed(my, ny) } else { 0.0 };
        let k1 = two_pi * m1 / ext[1];
        let f1 = if dim == 2 { w[1] * sinc(0.5 * k1 * w[1]) } else { 1.0 };
        for mx in 0..nx {
            let m0 = signed(mx, nx);
            if m0 == 0.0 && m1 == 0.0 {
                continue;
            }
            let k0 = two_pi * m0 / ext[0];
            let f0 = w[0] * sinc(0.5 * k0 * w[0]);
            let x = data[mx + nx * my];
            let coeff2 = (f0 * f1) * (f0 * f1) * x.norm_sqr();
            sum += coeff2 / (k0 * k0 + k1 * k1);
        }
    }
    let volume: f64 = (0..dim).map(|a| ext[a]).product();
    Ok((sum / volume).sqrt())
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// In-place 2-D FFT of row-major data (rows of length `nx`, `ny` rows).
fn fft_2d(data: &mut [Complex<f64>], nx: usize, ny: usize) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(nx);
    for row in data.chunks_mut(nx) {
        row_fft.process(row);
    }
    if ny > 1 {
        let col_fft = planner.plan_fft_forward(ny);
        let mut col = vec![Complex::new(0.0, 0.0); ny];
        for x in 0..nx {
            for y in 0..ny {
                col[y] = data[x + nx * y];
            }
            col_fft.process(&mut col);
            for y in 0..ny {
                data[x + nx * y] = col[y];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CartesianMesh;
    use crate::scheme::{discretize_initial, CellField};
    use crate::velocity::QuadratureConfig;
    use crate::Point;
    use std::sync::Arc;

    /// Exact transform of the piecewise-constant field by direct
    /// summation; quadratic in the cell count, test-only oracle.
    fn hminus1_direct(field: &CellField) -> f64 {
        let mesh = field.mesh();
        let [nx, ny] = mesh.cells_per_axis();
        let ext = mesh.extent();
        let w = mesh.widths();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut sum = 0.0;
        let my_max = if mesh.dim() == 2 { ny } else { 1 };
        for my in 0..my_max {
            let m1 = if my <= ny / 2 { my as f64 } else { my as f64 - ny as f64 };
            let m1 = if mesh.dim() == 2 { m1 } else { 0.0 };
            for mx in 0..nx {
                let m0 = if mx <= nx / 2 { mx as f64 } else { mx as f64 - nx as f64 };
                if m0 == 0.0 && m1 == 0.0 {
                    continue;
                }
                let k = [two_pi * m0 / ext[0], two_pi * m1 / ext[1]];
                let (mut re, mut im) = (0.0, 0.0);
                for (cell, &v) in field.values().iter().enumerate() {
                    let o = mesh.cell_origin(cell);
                    // integral of e^{-i k x} over the cell, per axis
                    let mut cr = 1.0;
                    let mut ci = 0.0;
                    for a in 0..mesh.dim() {
                        let mid = o[a] + 0.5 * w[a];
                        let mag = w[a] * sinc(0.5 * k[a] * w[a]);
                        let (s, c) = (-k[a] * mid).sin_cos();
                        let (nr, ni) = (cr * mag * c - ci * mag * s, cr * mag * s + ci * mag * c);
                        cr = nr;
                        ci = ni;
                    }
                    re += v * cr;
                    im += v * ci;
                }
                sum += (re * re + im * im) / (k[0] * k[0] + k[1] * k[1]);
            }
        }
        let volume: f64 = (0..mesh.dim()).map(|a| ext[a]).product();
        (sum / volume).sqrt()
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let mesh = Arc::new(CartesianMesh::unit_torus(8).unwrap());
        let f = CellField::zeros(mesh);
        assert_eq!(hminus1_norm(&f).unwrap(), 0.0);
    }

    #[test]
    fn matches_direct_summation_oracle() {
        let mesh = Arc::new(CartesianMesh::unit_torus(6).unwrap());
        let q = QuadratureConfig::default();
        let f = discretize_initial(
            |x: Point| {
                (2.0 * std::f64::consts::PI * x[0]).cos()
                    + 0.3 * (4.0 * std::f64::consts::PI * (x[0] + x[1])).sin()
            },
            &mesh,
            &q,
        )
        .unwrap();
        let got = hminus1_norm(&f).unwrap();
        let want = hminus1_direct(&f);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn matches_direct_summation_on_rectangular_torus() {
        let mesh =
            Arc::new(CartesianMesh::build(2, [2.0, 1.0], [8, 6], Boundary::Periodic).unwrap());
        let q = QuadratureConfig::default();
        let f = discretize_initial(
            |x: Point| (std::f64::consts::PI * x[0]).cos() * (2.0 * std::f64::consts::PI * x[1]).sin(),
            &mesh,
            &q,
        )
        .unwrap();
        let got = hminus1_norm(&f).unwrap();
        let want = hminus1_direct(&f);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn single_cosine_mode_approaches_parseval_value() {
        // cos(2 pi x1): coefficients 1/2 at k = +-2 pi e1,
        // norm^2 -> 2 * (1/4) / (4 pi^2), norm -> 1/(2 sqrt(2) pi)
        let want = 0.112539539519638259;
        let q = QuadratureConfig::default();
        let mut last_err = f64::INFINITY;
        for n in [16, 32, 64] {
            let mesh = Arc::new(CartesianMesh::unit_torus(n).unwrap());
            let f = discretize_initial(
                |x: Point| (2.0 * std::f64::consts::PI * x[0]).cos(),
                &mesh,
                &q,
            )
            .unwrap();
            let err = (hminus1_norm(&f).unwrap() - want).abs();
            assert!(err < last_err, "error must decrease with refinement");
            last_err = err;
        }
        assert!(last_err < 1e-4);
    }

    #[test]
    fn doubled_frequency_halves_the_norm() {
        let want = 0.0562697697598191293;
        let mesh = Arc::new(CartesianMesh::unit_torus(64).unwrap());
        let f = discretize_initial(
            |x: Point| (4.0 * std::f64::consts::PI * x[0]).cos(),
            &mesh,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((hminus1_norm(&f).unwrap() - want).abs() < 1e-3);
    }

    #[test]
    fn rejects_nonzero_mean_and_non_periodic() {
        let mesh = Arc::new(CartesianMesh::unit_torus(4).unwrap());
        let f = CellField::from_values(Arc::clone(&mesh), vec![1.0; 16], 0).unwrap();
        assert!(matches!(hminus1_norm(&f), Err(Error::NonZeroMean { .. })));
        let nf = Arc::new(CartesianMesh::build(2, [1.0, 1.0], [4, 4], Boundary::NoFlux).unwrap());
        let g = CellField::zeros(nf);
        assert!(matches!(hminus1_norm(&g), Err(Error::RequiresPeriodic)));
    }
}
