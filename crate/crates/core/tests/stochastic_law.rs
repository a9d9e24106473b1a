//! The chain's empirical law against the scheme trajectory.

use std::sync::Arc;

use upwind_core::mesh::{Boundary, CartesianMesh};
use upwind_core::scheme::{discretize_initial, run_steps, CellField};
use upwind_core::stochastic::{empirical_law_check, simulate, LawCheckConfig, SimConfig};
use upwind_core::velocity::{QuadratureConfig, VelocityField};

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

#[test]
fn point_datum_spreads_like_the_binomial_law() {
    // 1-D half-Courant: after two steps the cell law is (1/4, 1/2, 1/4)
    let mesh = Arc::new(CartesianMesh::line(1.0, 8, Boundary::Periodic).unwrap());
    let h = mesh.widths()[0];
    let dt = 0.5 * h;
    let field = VelocityField::constant([1.0, 0.0]);
    let mut values = vec![0.0; 8];
    values[0] = 1.0;
    let rho0 = CellField::from_values(Arc::clone(&mesh), values, 0).unwrap();

    let particles = 400_000;
    let mut cfg = SimConfig::new(particles, 2, dt, 101);
    cfg.record_cell_law = true;
    let sim = simulate(&rho0, &field, &cfg, &quad()).unwrap();
    let hist = &sim.histograms.as_ref().unwrap()[2];
    let mass = rho0.mass();
    let want = [0.25, 0.5, 0.25];
    for (cell, w) in want.iter().enumerate() {
        let p = hist[cell] / mass;
        let sigma = (w * (1.0 - w) / particles as f64).sqrt();
        assert!((p - w).abs() <= 4.0 * sigma, "cell {cell}: {p} vs {w}");
    }
}

#[test]
fn zero_field_histogram_noise_is_sampling_noise() {
    let mesh = Arc::new(CartesianMesh::unit_torus(8).unwrap());
    let rho0 = discretize_initial(|x| 1.5 + (x[0] - 0.5).abs(), &mesh, &quad()).unwrap();
    let field = VelocityField::constant([0.0, 0.0]);
    let particles = 250_000;
    let mut cfg = SimConfig::new(particles, 4, 0.03, 7);
    cfg.record_cell_law = true;
    let sim = simulate(&rho0, &field, &cfg, &quad()).unwrap();

    let mut trajectory = Vec::new();
    run_steps(&rho0, &field, 0.0, 0.03, 4, &quad(), |_, s| trajectory.push(s.clone())).unwrap();
    let report = empirical_law_check(&sim, &trajectory, &LawCheckConfig::default()).unwrap();
    assert!(report.pass, "zero-field law check failed: {report:?}");
    // the TV discrepancy is pure sampling noise, well under the band
    for step in &report.per_step {
        assert!(step.tv <= 0.4 * step.tolerance, "TV {} suspiciously large", step.tv);
    }
}

#[test]
fn law_check_passes_for_both_builtin_fields() {
    for field in [VelocityField::constant([0.0, 1.0]), VelocityField::sobolev_shear()] {
        let mesh = Arc::new(CartesianMesh::unit_torus(8).unwrap());
        let rho0 = discretize_initial(
            |x| if (x[0] % 1.0 < 0.5) == (x[1] % 1.0 < 0.5) { 2.0 } else { 0.0 },
            &mesh,
            &quad(),
        )
        .unwrap();
        let dt = mesh.widths()[0] / 4.0;
        let steps = 8;
        let mut trajectory = Vec::new();
        run_steps(&rho0, &field, 0.0, dt, steps, &quad(), |_, s| trajectory.push(s.clone()))
            .unwrap();
        let mut cfg = SimConfig::new(200_000, steps, dt, 11);
        cfg.record_cell_law = true;
        let sim = simulate(&rho0, &field, &cfg, &quad()).unwrap();
        let report = empirical_law_check(&sim, &trajectory, &LawCheckConfig::default()).unwrap();
        assert!(report.pass, "law check failed for {}", field.name());
    }
}

#[test]
fn law_check_rejects_mismatched_runs() {
    let mesh = Arc::new(CartesianMesh::unit_torus(4).unwrap());
    let rho0 = discretize_initial(|_| 1.0, &mesh, &quad()).unwrap();
    let field = VelocityField::constant([0.0, 0.0]);
    let mut cfg = SimConfig::new(100, 3, 0.05, 1);
    cfg.record_cell_law = true;
    let sim = simulate(&rho0, &field, &cfg, &quad()).unwrap();
    // trajectory with the wrong number of states
    let trajectory = vec![rho0.clone(), rho0.clone()];
    assert!(empirical_law_check(&sim, &trajectory, &LawCheckConfig::default()).is_err());
    // simulation without law recording
    let sim2 = simulate(&rho0, &field, &SimConfig::new(100, 3, 0.05, 1), &quad()).unwrap();
    let mut trajectory = Vec::new();
    run_steps(&rho0, &field, 0.0, 0.05, 3, &quad(), |_, s| trajectory.push(s.clone())).unwrap();
    assert!(empirical_law_check(&sim2, &trajectory, &LawCheckConfig::default()).is_err());
}
