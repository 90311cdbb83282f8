mod common;

use std::f64::consts::PI;

use common::{dense_principal_eigenvalue, dense_solve, random_stream, toeplitz_eigenvalue, torsion_series};
use explosion_core::elliptic::{
    assemble, assemble_adjoint, decay_profile, evolve, exit_time, principal_eigenvalue, solve, theta, AdvectionScheme, EvolveOptions,
    FlowProblem, SolveOptions,
};
use explosion_core::geometry::{build_grid, builtin_flow, DomainSpec, FlowField, Grid2D};
use explosion_core::{CatalogEntry, ScalarField};

fn square(res: usize) -> Grid2D {
    build_grid(&DomainSpec::unit_square(), res).unwrap()
}

fn flow(name: &str, grid: &Grid2D) -> FlowField {
    builtin_flow(&CatalogEntry::new(name), grid).unwrap()
}

fn incompressible_cases(res: usize) -> Vec<(Grid2D, FlowField)> {
    let sq = square(res);
    let four = build_grid(&DomainSpec::square(2.0 * PI), res).unwrap();
    let sinsin = flow("sinsin", &sq);
    let shear = builtin_flow(&CatalogEntry::new("shear").with("c", 1.0), &sq).unwrap();
    let fig2 = flow("fig2", &four);
    vec![(sq.clone(), sinsin), (sq, shear), (four, fig2)]
}

#[test]
fn laplacian_stencil() {
    let g = square(9);
    let h = g.hx();
    let op = assemble(&g, &FlowField::zero(&g), 0.0, None).unwrap();
    let m = op.matrix();
    let c = g.unknown(g.node(4, 4)).unwrap();
    let w = g.unknown(g.node(3, 4)).unwrap();
    let n = g.unknown(g.node(4, 5)).unwrap();
    assert_eq!(m.get(c, c), 4.0 / (h * h));
    assert_eq!(m.get(c, w), -1.0 / (h * h));
    assert_eq!(m.get(c, n), -1.0 / (h * h));
    assert_eq!(op.dim(), 49);
}

#[test]
fn upwind_stencil_for_uniform_flow() {
    let g = square(9);
    let h = g.hx();
    let f = FlowField::from_formula(&g, "uniform", |_, _| [1.0, 0.0], true).unwrap();
    for scheme in [AdvectionScheme::Upwind, AdvectionScheme::NodalUpwind] {
        let op = FlowProblem::new(&g, &f, 10.0).with_scheme(scheme).operator().unwrap();
        let m = op.matrix();
        let c = g.unknown(g.node(4, 4)).unwrap();
        let w = g.unknown(g.node(3, 4)).unwrap();
        let e = g.unknown(g.node(5, 4)).unwrap();
        assert!((m.get(c, w) - (-1.0 / (h * h) - 10.0 / h)).abs() < 1e-12);
        assert!((m.get(c, e) - (-1.0 / (h * h))).abs() < 1e-12);
        assert!((m.get(c, c) - (4.0 / (h * h) + 10.0 / h)).abs() < 1e-12);
    }
}

#[test]
fn m_matrix_structure_at_amplitude_100() {
    for (g, f) in incompressible_cases(33) {
        for scheme in [AdvectionScheme::Upwind, AdvectionScheme::NodalUpwind] {
            let op = FlowProblem::new(&g, &f, 100.0).with_scheme(scheme).operator().unwrap();
            let m = op.matrix();
            assert!(m.is_z_matrix());
            let diag = m.diagonal();
            assert!(diag.iter().all(|d| *d > 0.0));
            for (r, s) in m.row_sums().iter().enumerate() {
                // exact cancellation up to roundoff in the face fluxes
                assert!(*s >= -1e-12 * diag[r], "{} {} row {r}: {s}", f.name(), scheme.name());
            }
            // rows next to the frame keep the eliminated boundary coupling
            let k = g.unknown(g.node(1, 1)).unwrap();
            assert!(m.row_sums()[k] > 0.0);
        }
    }
}

#[test]
fn zero_rhs_gives_zero() {
    let g = square(17);
    let f = flow("sinsin", &g);
    let op = assemble(&g, &f, 50.0, None).unwrap();
    let q = solve(&op, &ScalarField::zeros(&g), &SolveOptions::default()).unwrap();
    assert!(q.values().iter().all(|v| *v == 0.0));
}

#[test]
fn torsion_function_matches_series() {
    let oracle = torsion_series(0.5, 0.5, 301);
    assert!((oracle - 0.07367).abs() < 1e-5);
    let g = square(129);
    let tau = exit_time(&g, &FlowField::zero(&g), 0.0).unwrap();
    assert!((theta(&tau) - oracle).abs() / oracle < 1e-3, "{} vs {oracle}", theta(&tau));
    let k = g.nearest_node(0.25, 0.5);
    assert!((tau.values()[k] - torsion_series(0.25, 0.5, 301)).abs() < 1e-4);
    assert_eq!(theta(&ScalarField::zeros(&g)), 0.0);
}

#[test]
fn sparse_solve_matches_dense_elimination() {
    let g = square(9);
    for seed in 0..10 {
        let s = random_stream(seed);
        let f = FlowField::from_stream(&s, &g).unwrap();
        let op = assemble(&g, &f, 5.0 * seed as f64, None).unwrap();
        let rhs: Vec<f64> = (0..op.dim()).map(|i| ((i * 7 + seed as usize) % 5) as f64 - 1.5).collect();
        let q = explosion_core::elliptic::solve_unknowns(&op, &rhs, &SolveOptions::default()).unwrap();
        let d = dense_solve(op.matrix().to_dense(), rhs);
        let err = q.iter().zip(&d).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "seed {seed}: {err}");
    }
}

#[test]
fn iterative_and_direct_agree() {
    let g = square(65);
    let f = flow("sinsin", &g);
    let op = assemble(&g, &f, 256.0, None).unwrap();
    let rhs = vec![1.0; op.dim()];
    let mut opts = SolveOptions::default();
    opts.method = explosion_core::elliptic::SolverMethod::Direct;
    let a = explosion_core::elliptic::solve_unknowns(&op, &rhs, &opts).unwrap();
    opts.method = explosion_core::elliptic::SolverMethod::Iterative;
    let b = explosion_core::elliptic::solve_unknowns(&op, &rhs, &opts).unwrap();
    let scale = a.iter().cloned().fold(0.0, f64::max);
    let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(err < 1e-7 * scale);
}

#[test]
fn exit_time_is_uniformly_bounded_in_the_flow() {
    for (g, f) in incompressible_cases(65) {
        let theta0 = theta(&exit_time(&g, &FlowField::zero(&g), 0.0).unwrap());
        let mut previous = f64::INFINITY;
        for a in [0.0, 64.0, 256.0, 1024.0] {
            let tau = exit_time(&g, &f, a).unwrap();
            assert!(tau.values().iter().all(|v| *v >= 0.0));
            let t = theta(&tau);
            assert!(t <= 1.05 * theta0, "{} A={a}: {t} vs {theta0}", f.name());
            if f.name() == "sinsin" {
                assert!(t < previous, "sinsin theta not decreasing at A={a}");
                previous = t;
            }
        }
    }
}

#[test]
fn adjoint_is_the_transpose() {
    let g = square(9);
    for seed in 0..5 {
        let f = FlowField::from_stream(&random_stream(seed), &g).unwrap();
        let a = assemble(&g, &f, 30.0, None).unwrap();
        let t = assemble_adjoint(&g, &f, 30.0, None).unwrap();
        assert!(t.is_adjoint());
        assert_eq!(t.matrix().to_dense(), a.matrix().transpose().to_dense());
    }
    let z = FlowField::zero(&g);
    assert_eq!(
        assemble_adjoint(&g, &z, 0.0, None).unwrap().matrix().to_dense(),
        assemble(&g, &z, 0.0, None).unwrap().matrix().to_dense()
    );
}

#[test]
fn compressible_adjoint_row_sums_differ() {
    let d = build_grid(&DomainSpec::Disk { radius: 1.0 }, 17).unwrap();
    let f = builtin_flow(&CatalogEntry::new("radial").with("n", 2.0), &d).unwrap();
    let a = assemble(&d, &f, 1.0, None).unwrap().matrix().row_sums();
    let t = assemble_adjoint(&d, &f, 1.0, None).unwrap().matrix().row_sums();
    let diff = a.iter().zip(&t).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff > 1.0);
}

#[test]
fn flow_free_eigenvalue() {
    let g = square(65);
    let h = g.hx();
    let e = principal_eigenvalue(&assemble(&g, &FlowField::zero(&g), 0.0, None).unwrap()).unwrap();
    let discrete = 8.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    assert!((e.eigenvalue - discrete).abs() < 1e-8 * discrete);
    assert!((e.eigenvalue / (2.0 * PI * PI) - 1.0).abs() < 0.01);
    assert!(e.residual <= 1e-8);
    let psi = e.eigenfunction.to_unknowns(&g).unwrap();
    assert!(psi.iter().all(|v| *v > 0.0));
    assert!((psi.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-14);
}

#[test]
fn shear_eigenvalue_matches_toeplitz_formula() {
    let g = square(65);
    let h = g.hx();
    let m = 63;
    let f = builtin_flow(&CatalogEntry::new("shear").with("c", 1.0), &g).unwrap();
    for a in [16.0, 64.0, 512.0, 1024.0] {
        let e = principal_eigenvalue(&assemble(&g, &f, a, None).unwrap()).unwrap();
        let x = toeplitz_eigenvalue(2.0 / (h * h) + a / h, 1.0 / (h * h) + a / h, 1.0 / (h * h), m, 1);
        let y = toeplitz_eigenvalue(2.0 / (h * h), 1.0 / (h * h), 1.0 / (h * h), m, 1);
        let exact = x + y;
        assert!((e.eigenvalue - exact).abs() < 1e-8 * exact, "A={a}: {} vs {exact}", e.eigenvalue);
    }
}

#[test]
fn radial_flow_collapses_the_eigenvalue() {
    let d = build_grid(&DomainSpec::Disk { radius: 1.0 }, 97).unwrap();
    let mus: Vec<f64> = (0..4)
        .map(|n| {
            let f = builtin_flow(&CatalogEntry::new("radial").with("n", n as f64), &d).unwrap();
            principal_eigenvalue(&assemble(&d, &f, 1.0, None).unwrap()).unwrap().eigenvalue
        })
        .collect();
    assert!(mus.windows(2).all(|w| w[1] < w[0]), "{mus:?}");
    assert!(mus[3] < 0.1 * mus[0], "{mus:?}");
}

#[test]
fn radial_eigenvalue_matches_dense_oracle() {
    let d = build_grid(&DomainSpec::Disk { radius: 1.0 }, 17).unwrap();
    for n in 0..4 {
        let f = builtin_flow(&CatalogEntry::new("radial").with("n", n as f64), &d).unwrap();
        let op = assemble(&d, &f, 1.0, None).unwrap();
        let e = principal_eigenvalue(&op).unwrap().eigenvalue;
        let oracle = dense_principal_eigenvalue(&op.matrix().to_dense(), 400);
        assert!((e - oracle).abs() < 1e-8 * oracle, "n={n}: {e} vs {oracle}");
    }
}

#[test]
fn adjoint_has_the_same_principal_eigenvalue() {
    let g = square(33);
    let f = flow("sinsin", &g);
    let a = principal_eigenvalue(&assemble(&g, &f, 64.0, None).unwrap()).unwrap().eigenvalue;
    let t = principal_eigenvalue(&assemble_adjoint(&g, &f, 64.0, None).unwrap())
        .unwrap()
        .eigenvalue;
    assert!((a - t).abs() < 1e-8 * a);
}

#[test]
fn zero_initial_data_stays_zero() {
    let g = square(17);
    let f = flow("sinsin", &g);
    let opts = EvolveOptions {
        dt: Some(1e-3),
        t_final: 0.05,
        checkpoints: vec![],
    };
    let run = evolve(&FlowProblem::new(&g, &f, 10.0), &ScalarField::zeros(&g), &opts).unwrap();
    assert!(run.linf.iter().all(|v| *v == 0.0));
}

#[test]
fn flow_free_decay_rate() {
    let g = square(33);
    let z = FlowField::zero(&g);
    let p = FlowProblem::new(&g, &z, 0.0);
    let mu = principal_eigenvalue(&p.operator().unwrap()).unwrap().eigenvalue;
    let run = evolve(
        &p,
        &ScalarField::from_fn_interior(&g, |_, _| 1.0),
        &EvolveOptions {
            dt: None,
            t_final: 0.2,
            checkpoints: vec![],
        },
    )
    .unwrap();
    let fit = run.l2_decay(0.05, 0.2).unwrap();
    assert!((fit.rate / mu - 1.0).abs() < 0.1, "{} vs {mu}", fit.rate);
    assert!(run.min_value >= 0.0);
}

#[test]
fn l1_norm_never_increases_for_cellular_flow() {
    let g = square(65);
    let f = flow("sinsin", &g);
    let init = ScalarField::from_fn_interior(&g, |x, y| (-(x - 0.3f64).powi(2) * 40.0 - (y - 0.6f64).powi(2) * 40.0).exp());
    let run = evolve(
        &FlowProblem::new(&g, &f, 256.0),
        &init,
        &EvolveOptions {
            dt: Some(1e-3),
            t_final: 0.3,
            checkpoints: vec![],
        },
    )
    .unwrap();
    assert!(run.l1_non_increasing());
    assert!(run.min_value >= 0.0);
}

fn checkpoints(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t0 * (t1 / t0).powf(k as f64 / (n - 1) as f64)).collect()
}

#[test]
fn decay_profile_rate_and_power() {
    let g = square(33);
    let z = FlowField::zero(&g);
    let p = FlowProblem::new(&g, &z, 0.0);
    let e = principal_eigenvalue(&p.operator().unwrap()).unwrap();
    let opts = EvolveOptions {
        dt: None,
        t_final: 0.5,
        checkpoints: checkpoints(0.02, 0.5, 12),
    };
    let run = evolve(&p, &ScalarField::from_fn_interior(&g, |_, _| 1.0), &opts).unwrap();
    let prof = decay_profile(&run, 2.0).unwrap();
    assert!((prof.alpha / e.eigenvalue - 1.0).abs() < 0.1, "{} vs {}", prof.alpha, e.eigenvalue);

    let run = evolve(&p, &e.eigenfunction, &opts).unwrap();
    let prof = decay_profile(&run, 2.0).unwrap();
    assert!(prof.r.abs() < 0.05, "r = {}", prof.r);
    assert!((prof.alpha / e.eigenvalue - 1.0).abs() < 0.1);
}

#[test]
fn decay_envelope_dominates_checkpoints() {
    let g = square(65);
    let f = flow("sinsin", &g);
    let p = FlowProblem::new(&g, &f, 256.0);
    let init = ScalarField::from_fn_interior(&g, |x, y| (PI * x).sin() * (2.0 * PI * y).sin().abs());
    let run = evolve(
        &p,
        &init,
        &EvolveOptions {
            dt: Some(2e-3),
            t_final: 0.4,
            checkpoints: checkpoints(0.01, 0.4, 10),
        },
    )
    .unwrap();
    let prof = decay_profile(&run, 2.0).unwrap();
    let fp = init.norm_lp(2.0);
    for (t, field) in &run.checkpoints {
        let bound = prof.c * (-prof.alpha * t).exp() * t.powf(-prof.r) * fp;
        assert!(field.norm_inf() <= bound * (1.0 + 1e-12), "t={t}");
    }
}

#[test]
fn decay_profile_needs_checkpoints() {
    let g = square(17);
    let z = FlowField::zero(&g);
    let run = evolve(
        &FlowProblem::new(&g, &z, 0.0),
        &ScalarField::from_fn_interior(&g, |_, _| 1.0),
        &EvolveOptions {
            dt: Some(1e-3),
            t_final: 0.01,
            checkpoints: vec![0.005],
        },
    )
    .unwrap();
    assert!(decay_profile(&run, 2.0).is_err());
}
