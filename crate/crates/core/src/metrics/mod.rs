//! Error measures between cell fields and discrete measures.
//!
//! Strong norms (`L^1`, `L^2`, `L^inf`) live here; the weak-convergence
//! metrics are in the submodules: spectral `H^-1` ([`spectral`]), exact
//! one-dimensional Wasserstein-1 ([`w1`]), and the logarithmic
//! Kantorovich–Rubinstein distance via exact discrete optimal transport
//! ([`kr`], backed by the network simplex in [`flow`]).

pub mod flow;
pub mod kr;
pub mod spectral;
pub mod w1;

use crate::error::{Error, Result};
use crate::scheme::{kahan_sum, CellField};
use crate::Point;

pub use kr::{coupling_upper_bound, kr_cost, kr_distance, KrConfig, KrOutcome, TransportPlan};
pub use spectral::hminus1_norm;
pub use w1::w1_1d;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpNorm {
    L1,
    L2,
    LInf,
}

/// Weighted norm `(sum |K| |a_K|^q)^(1/q)` of a single field.
pub fn lp_norm(field: &CellField, q: LpNorm) -> f64 {
    let vol = field.mesh().cell_volume();
    match q {
        LpNorm::L1 => kahan_sum(field.values().iter().map(|v| v.abs())) * vol,
        LpNorm::L2 => (kahan_sum(field.values().iter().map(|v| v * v)) * vol).sqrt(),
        LpNorm::LInf => field.max_abs(),
    }
}

/// Norm of the difference of two fields on the same mesh.
pub fn l_norm_error(a: &CellField, b: &CellField, q: LpNorm) -> Result<f64> {
    if !a.same_mesh(b) {
        return Err(Error::MeshMismatch);
    }
    let vol = a.mesh().cell_volume();
    let diff = a.values().iter().zip(b.values());
    Ok(match q {
        LpNorm::L1 => kahan_sum(diff.map(|(x, y)| (x - y).abs())) * vol,
        LpNorm::L2 => (kahan_sum(diff.map(|(x, y)| (x - y) * (x - y))) * vol).sqrt(),
        LpNorm::LInf => diff.fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
    })
}

/// A nonnegative discrete measure: weighted points.
#[derive(Debug, Clone, Default)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::InvalidConfig(
                "points and masses differ in length".into(),
            ));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::NonFinite("measure masses must be finite and >= 0".into()));
        }
        Ok(DiscreteMeasure { points, masses })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.masses.iter().copied())
    }

    /// Drops zero-mass points.
    pub fn pruned(mut self) -> Self {
        let mut keep = Vec::with_capacity(self.len());
        let mut masses = Vec::with_capacity(self.len());
        for (p, m) in self.points.iter().zip(&self.masses) {
            if *m > 0.0 {
                keep.push(*p);
                masses.push(*m);
            }
        }
        self.points = keep;
        self.masses = masses;
        self
    }
}

/// Collapses a nonnegative cell field to point masses `|K| rho_K` at cell
/// centroids. The collapse introduces an `O(h)` bias, acceptable whenever
/// measured distances are themselves of order `sqrt(h)` or larger.
pub fn measure_from_field(field: &CellField) -> Result<DiscreteMeasure> {
    if field.min() < 0.0 {
        return Err(Error::InvalidConfig(
            "field must be nonnegative to define a measure".into(),
        ));
    }
    let mesh = field.mesh();
    let vol = mesh.cell_volume();
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for (cell, &v) in field.values().iter().enumerate() {
        if v > 0.0 {
            points.push(mesh.cell_center(cell));
            masses.push(vol * v);
        }
    }
    Ok(DiscreteMeasure { points, masses })
}

/// Splits the signed difference `a - b` into its positive and negative
/// parts as centroid measures (the transshipment reduction applied at the
/// field level).
pub fn difference_measures(a: &CellField, b: &CellField) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if !a.same_mesh(b) {
        return Err(Error::MeshMismatch);
    }
    let mesh = a.mesh();
    let vol = mesh.cell_volume();
    let mut plus = DiscreteMeasure::default();
    let mut minus = DiscreteMeasure::default();
    for (cell, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
        let d = x - y;
        if d > 0.0 {
            plus.points.push(mesh.cell_center(cell));
            plus.masses.push(vol * d);
        } else if d < 0.0 {
            minus.points.push(mesh.cell_center(cell));
            minus.masses.push(vol * (-d));
        }
    }
    Ok((plus, minus))
}

pub(crate) fn euclid(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CartesianMesh;
    use crate::scheme::discretize_initial;
    use crate::velocity::QuadratureConfig;
    use std::sync::Arc;

    fn checkerboard_fields() -> (CellField, CellField) {
        let mesh = Arc::new(CartesianMesh::unit_torus(8).unwrap());
        let q = QuadratureConfig::default();
        let f = |x: Point| {
            if (x[0] % 1.0 < 0.5) == (x[1] % 1.0 < 0.5) {
                1.0
            } else {
                -1.0
            }
        };
        let a = discretize_initial(f, &mesh, &q).unwrap();
        let b = discretize_initial(|x| -f(x), &mesh, &q).unwrap();
        (a, b)
    }

    #[test]
    fn identical_fields_have_zero_error() {
        let (a, _) = checkerboard_fields();
        for q in [LpNorm::L1, LpNorm::L2, LpNorm::LInf] {
            assert_eq!(l_norm_error(&a, &a, q).unwrap(), 0.0);
        }
    }

    #[test]
    fn checkerboard_vs_negation() {
        let (a, b) = checkerboard_fields();
        assert!((l_norm_error(&a, &b, LpNorm::L1).unwrap() - 2.0).abs() < 1e-13);
        assert!((l_norm_error(&a, &b, LpNorm::L2).unwrap() - 2.0).abs() < 1e-13);
        assert!((l_norm_error(&a, &b, LpNorm::LInf).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let (a, _) = checkerboard_fields();
        let other = Arc::new(CartesianMesh::unit_torus(4).unwrap());
        let b = discretize_initial(|_| 0.0, &other, &QuadratureConfig::default()).unwrap();
        assert!(l_norm_error(&a, &b, LpNorm::L1).is_err());
    }

    #[test]
    fn difference_measures_balance() {
        let (a, b) = checkerboard_fields();
        let (p, m) = difference_measures(&a, &b).unwrap();
        assert!((p.total() - m.total()).abs() < 1e-12);
        assert!((p.total() - 1.0).abs() < 1e-12); // half the cells differ by +2, volume 1/2
    }
}
