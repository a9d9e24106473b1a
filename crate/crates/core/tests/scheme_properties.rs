//! Cross-module properties of the stepper: stability, linearity, and the
//! agreement of the two update forms on randomized valid configurations.

use std::sync::Arc;

use upwind_core::mesh::{Boundary, CartesianMesh};
use upwind_core::metrics::{lp_norm, LpNorm};
use upwind_core::scheme::{
    assemble_transitions, discretize_initial, run_steps, step, step_markov, CellField,
};
use upwind_core::stochastic::CounterRng;
use upwind_core::velocity::{assemble_edge_fluxes, QuadratureConfig, VelocityField};

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn random_field(mesh: &Arc<CartesianMesh>, seed: u64, nonneg: bool) -> CellField {
    let rng = CounterRng::new(seed);
    let values: Vec<f64> = (0..mesh.n_cells())
        .map(|i| {
            let u = rng.uniform(i as u64, 0, 0);
            if nonneg {
                u * 2.0
            } else {
                2.0 * u - 1.0
            }
        })
        .collect();
    CellField::from_values(Arc::clone(mesh), values, 0).unwrap()
}

fn builtins() -> [VelocityField; 2] {
    [VelocityField::constant([0.0, 1.0]), VelocityField::sobolev_shear()]
}

#[test]
fn positivity_and_mass_and_lq_stability() {
    for (fi, field) in builtins().into_iter().enumerate() {
        for n in [16usize, 32] {
            let mesh = Arc::new(CartesianMesh::unit_torus(n).unwrap());
            let dt = mesh.widths()[0] / 4.0;
            let fx = assemble_edge_fluxes(&field, &mesh, 0, 0.0, dt, &quad()).unwrap();
            let mut state = random_field(&mesh, 17 + fi as u64, true);
            let m0 = state.mass();
            let mut norms = [
                lp_norm(&state, LpNorm::L1),
                lp_norm(&state, LpNorm::L2),
                lp_norm(&state, LpNorm::LInf),
            ];
            for _ in 0..60 {
                state = step(&state, &fx, dt);
                assert!(state.min() >= 0.0, "positivity violated");
                let next = [
                    lp_norm(&state, LpNorm::L1),
                    lp_norm(&state, LpNorm::L2),
                    lp_norm(&state, LpNorm::LInf),
                ];
                for (q, (new, old)) in next.iter().zip(&norms).enumerate() {
                    assert!(
                        *new <= old * (1.0 + 1e-12),
                        "L^q stability violated for q index {q}: {new} > {old}"
                    );
                }
                norms = next;
            }
            assert!((state.mass() - m0).abs() <= 1e-12 * m0.abs());
        }
    }
}

#[test]
fn max_norm_contracts_for_signed_data() {
    for field in builtins() {
        let mesh = Arc::new(CartesianMesh::unit_torus(32).unwrap());
        let dt = mesh.widths()[0] / 4.0;
        let fx = assemble_edge_fluxes(&field, &mesh, 0, 0.0, dt, &quad()).unwrap();
        let mut state = random_field(&mesh, 5, false);
        let mut sup = state.max_abs();
        for _ in 0..60 {
            state = step(&state, &fx, dt);
            let next = state.max_abs();
            assert!(next <= sup * (1.0 + 1e-12));
            sup = next;
        }
    }
}

#[test]
fn scheme_is_linear_in_the_datum() {
    // splitting the datum into positive and negative parts and running
    // each separately recombines to the direct run
    let mesh = Arc::new(CartesianMesh::unit_torus(16).unwrap());
    let dt = mesh.widths()[0] / 4.0;
    let field = VelocityField::sobolev_shear();
    let signed = random_field(&mesh, 23, false);
    let plus_vals: Vec<f64> = signed.values().iter().map(|v| v.max(0.0)).collect();
    let minus_vals: Vec<f64> = signed.values().iter().map(|v| (-v).max(0.0)).collect();
    let plus = CellField::from_values(Arc::clone(&mesh), plus_vals, 0).unwrap();
    let minus = CellField::from_values(Arc::clone(&mesh), minus_vals, 0).unwrap();

    let n = 40;
    let direct = run_steps(&signed, &field, 0.0, dt, n, &quad(), |_, _| {}).unwrap();
    let p = run_steps(&plus, &field, 0.0, dt, n, &quad(), |_, _| {}).unwrap();
    let m = run_steps(&minus, &field, 0.0, dt, n, &quad(), |_, _| {}).unwrap();
    for ((d, a), b) in direct.values().iter().zip(p.values()).zip(m.values()) {
        assert!((d - (a - b)).abs() <= 1e-12);
    }
}

#[test]
fn flux_and_markov_forms_agree_on_random_configurations() {
    let rng = CounterRng::new(37);
    for trial in 0..5u64 {
        let n = 8 + (rng.raw(trial, 0, 0) % 17) as usize;
        let boundary = if rng.raw(trial, 0, 1) % 2 == 0 {
            Boundary::Periodic
        } else {
            Boundary::NoFlux
        };
        let mesh = Arc::new(CartesianMesh::build(2, [1.0, 1.0], [n, n], boundary).unwrap());
        let dt = mesh.widths()[0] / 4.0;
        // a bounded random-ish smooth field, frozen in time
        let a = 1.0 + rng.uniform(trial, 0, 2);
        let b = 2.0 * rng.uniform(trial, 0, 3) - 1.0;
        let field = VelocityField::from_fn("trial", 2.0, true, move |_, x| {
            [
                a * (2.0 * std::f64::consts::PI * x[1]).cos() * 0.5,
                b * (2.0 * std::f64::consts::PI * x[0]).sin() * 0.5,
            ]
        });
        let fx = assemble_edge_fluxes(&field, &mesh, 0, 0.0, dt, &quad()).unwrap();
        let table = assemble_transitions(&fx, &mesh, dt).unwrap();
        let mut x = random_field(&mesh, 1000 + trial, false);
        let mut y = x.clone();
        for _ in 0..15 {
            x = step(&x, &fx, dt);
            y = step_markov(&y, &table);
        }
        let scale = x.max_abs().max(1e-300);
        for (u, v) in x.values().iter().zip(y.values()) {
            assert!((u - v).abs() <= 1e-13 * scale);
        }
    }
}

#[test]
fn time_reversal_with_zero_field_is_exact() {
    let mesh = Arc::new(CartesianMesh::unit_torus(16).unwrap());
    let dt = mesh.widths()[0] / 4.0;
    let field = VelocityField::constant([0.0, 0.0]);
    let init = discretize_initial(
        |x| if (x[0] % 1.0 < 0.5) == (x[1] % 1.0 < 0.5) { 1.0 } else { -1.0 },
        &mesh,
        &quad(),
    )
    .unwrap();
    let fwd = run_steps(&init, &field, 0.0, dt, 32, &quad(), |_, _| {}).unwrap();
    let back = run_steps(&fwd, &field.negated(), 0.5, dt, 32, &quad(), |_, _| {}).unwrap();
    assert_eq!(init.values(), back.values());
}

#[test]
fn no_flux_walls_conserve_mass_with_incompatible_fields() {
    // a constant field on a walled domain: flux through the walls is
    // clamped to zero, so mass stays inside even as it piles up downstream
    let mesh = Arc::new(CartesianMesh::line(1.0, 32, Boundary::NoFlux).unwrap());
    let dt = mesh.widths()[0] / 4.0;
    let field = VelocityField::constant([1.0, 0.0]);
    let init = discretize_initial(|x| 1.0 + (3.0 * x[0]).sin().abs(), &mesh, &quad()).unwrap();
    let m0 = init.mass();
    let out = run_steps(&init, &field, 0.0, dt, 400, &quad(), |_, _| {}).unwrap();
    assert!((out.mass() - m0).abs() <= 1e-12 * m0);
    assert!(out.min() >= 0.0);
}
