mod common;

use std::f64::consts::PI;

use common::{disk_gelfand_center, disk_gelfand_threshold, torsion_series};
use explosion_core::elliptic::{exit_time, principal_eigenvalue, AdvectionScheme, FlowProblem};
use explosion_core::explosion::{
    equidistribution_norm, lambda_star, minimal_solution, stability_eigenvalue, threshold_bounds, uniform_bound_check, ExplosionSolver,
    MinimalSolutionOptions, SolveStatus, ThresholdOptions,
};
use explosion_core::geometry::{build_grid, builtin_flow, stream_function, DomainSpec, FlowField, Grid2D, Nonlinearity};
use explosion_core::{CatalogEntry, ScalarField};

fn square(res: usize) -> Grid2D {
    build_grid(&DomainSpec::unit_square(), res).unwrap()
}

fn disk(res: usize) -> Grid2D {
    build_grid(&DomainSpec::Disk { radius: 1.0 }, res).unwrap()
}

#[test]
fn zero_lambda_gives_zero_solution() {
    let g = square(33);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let r = minimal_solution(&g, &f, 64.0, 0.0, &Nonlinearity::exponential(), &MinimalSolutionOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert_eq!(r.iterations, 1);
    assert!(r.field.unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn negative_lambda_is_rejected() {
    let g = square(17);
    let z = FlowField::zero(&g);
    assert!(minimal_solution(&g, &z, 0.0, -1.0, &Nonlinearity::exponential(), &MinimalSolutionOptions::default()).is_err());
}

#[test]
fn small_lambda_solution_is_below_the_supersolution() {
    let g = square(65);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let e = Nonlinearity::exponential();
    for a in [0.0, 128.0] {
        let tau = exit_time(&g, &f, a).unwrap();
        let b = threshold_bounds(&g, &f, a, &e).unwrap();
        let lambda = b.lower;
        let r = minimal_solution(&g, &f, a, lambda, &e, &MinimalSolutionOptions::default()).unwrap();
        let phi = r.field.unwrap();
        for (p, t) in phi.values().iter().zip(tau.values()) {
            assert!(*p <= 2.0 * e.g(0.0) * lambda * t + 1e-12);
        }
    }
}

#[test]
fn disk_solution_matches_shooting() {
    let d = disk(129);
    let z = FlowField::zero(&d);
    let r = minimal_solution(&d, &z, 0.0, 1.0, &Nonlinearity::exponential(), &MinimalSolutionOptions::default()).unwrap();
    let oracle = disk_gelfand_center(1.0);
    assert!((oracle - (8.0 * (3.0 - 2.0 * 2f64.sqrt())).ln()).abs() < 1e-6);
    assert!((r.sup() / oracle - 1.0).abs() < 0.05, "{} vs {oracle}", r.sup());
    assert!(r.residual.unwrap() < 1e-6);
}

#[test]
fn sup_history_is_non_decreasing() {
    let g = square(33);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let r = minimal_solution(&g, &f, 64.0, 10.0, &Nonlinearity::exponential(), &MinimalSolutionOptions::default()).unwrap();
    assert!(r.sup_history.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(r.monotonicity_defect, 0.0);
}

#[test]
fn gelfand_threshold_on_the_disk() {
    let oracle = disk_gelfand_threshold();
    assert!((oracle - 2.0).abs() < 1e-6);
    let d = disk(193);
    let t = lambda_star(
        &d,
        &FlowField::zero(&d),
        0.0,
        &Nonlinearity::exponential(),
        &ThresholdOptions::default(),
    )
    .unwrap();
    assert!((t.lambda_star / oracle - 1.0).abs() < 0.08, "{}", t.lambda_star);
    assert!(t.sandwich_holds());
}

#[test]
fn flow_free_bounds() {
    let g = square(129);
    let z = FlowField::zero(&g);
    let e = Nonlinearity::exponential();
    let b = threshold_bounds(&g, &z, 0.0, &e).unwrap();
    let theta0 = torsion_series(0.5, 0.5, 301);
    assert!((b.lower - 2f64.ln() / (2.0 * theta0)).abs() / b.lower < 1e-3);
    assert!((b.lower - 4.704).abs() < 0.01, "{}", b.lower);
    assert!((b.upper - 19.74).abs() / 19.74 < 0.01, "{}", b.upper);
    let p = Nonlinearity::power(3.0).unwrap();
    let bp = threshold_bounds(&g, &z, 0.0, &p).unwrap();
    assert!((bp.lower - (2f64.powf(1.0 / 3.0) - 1.0) / (2.0 * b.theta)).abs() < 1e-9);
    assert!((bp.upper - b.mu1 / 3.0).abs() < 1e-9);
}

#[test]
fn lower_bound_is_anti_monotone_in_theta() {
    let g = square(65);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let e = Nonlinearity::exponential();
    let mut rows: Vec<(f64, f64)> = [0.0, 64.0, 256.0]
        .iter()
        .map(|a| {
            let b = threshold_bounds(&g, &f, *a, &e).unwrap();
            (b.theta, b.lower)
        })
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1), "{rows:?}");
}

#[test]
fn sandwich_and_monotonicity_in_lambda() {
    let g = square(65);
    let e = Nonlinearity::exponential();
    for entry in [CatalogEntry::new("sinsin"), CatalogEntry::new("shear").with("c", 1.0)] {
        let name = entry.name.clone();
        let f = builtin_flow(&entry, &g).unwrap();
        for a in [0.0, 64.0, 256.0] {
            let solver = ExplosionSolver::new(FlowProblem::new(&g, &f, a)).unwrap();
            let t = solver.lambda_star(&e, &ThresholdOptions::default()).unwrap();
            assert!(
                t.bounds.lower <= t.lambda_star && t.lambda_star <= 1.05 * t.bounds.upper,
                "{name} A={a}"
            );
            assert_eq!(t.max_monotonicity_defect(), 0.0);
            let half = solver
                .minimal_solution(0.5 * t.lambda_star, &e, &MinimalSolutionOptions::default())
                .unwrap();
            let most = solver
                .minimal_solution(0.9 * t.lambda_star, &e, &MinimalSolutionOptions::default())
                .unwrap();
            assert!(half.sup() < most.sup());
        }
    }
}

#[test]
fn bracket_is_sound() {
    let g = square(65);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let e = Nonlinearity::exponential();
    let opts = ThresholdOptions::default();
    let solver = ExplosionSolver::new(FlowProblem::new(&g, &f, 64.0)).unwrap();
    let t = solver.lambda_star(&e, &opts).unwrap();
    let (lo, hi) = t.bracket;
    assert!(lo < hi && (hi - lo) / lo <= opts.rtol);
    let below = solver
        .minimal_solution(t.lambda_star * (1.0 - 2.0 * opts.rtol), &e, &opts.minimal)
        .unwrap();
    let above = solver
        .minimal_solution(t.lambda_star * (1.0 + 2.0 * opts.rtol), &e, &opts.minimal)
        .unwrap();
    assert_eq!(below.status, SolveStatus::Converged);
    assert_ne!(above.status, SolveStatus::Converged);
}

fn refinement_sequence(amplitude: f64, rtol: f64) -> Vec<f64> {
    let e = Nonlinearity::exponential();
    let opts = ThresholdOptions {
        rtol,
        ..ThresholdOptions::default()
    };
    [65, 129, 257]
        .iter()
        .map(|&res| {
            let g = square(res);
            let f = if amplitude > 0.0 {
                builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap()
            } else {
                FlowField::zero(&g)
            };
            ExplosionSolver::new(FlowProblem::new(&g, &f, amplitude))
                .unwrap()
                .lambda_star(&e, &opts)
                .unwrap()
                .lambda_star
        })
        .collect()
}

#[test]
fn threshold_is_cauchy_under_refinement_with_flow() {
    let l = refinement_sequence(64.0, 5e-3);
    assert!((l[2] - l[1]).abs() < (l[1] - l[0]).abs(), "{l:?}");
}

/// Without flow the three thresholds differ by a few 1e−5 relative, so the
/// bisection must be resolved far below its default tolerance; this takes
/// tens of minutes at 257².
#[test]
#[ignore = "slow: run with --ignored"]
fn threshold_is_cauchy_under_refinement() {
    let l = refinement_sequence(0.0, 1e-6);
    assert!((l[2] - l[1]).abs() < (l[1] - l[0]).abs(), "{l:?}");
}

#[test]
fn stability_eigenvalue_examples() {
    let e = Nonlinearity::exponential();
    let g = square(33);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let mu = principal_eigenvalue(&FlowProblem::new(&g, &f, 64.0).operator().unwrap())
        .unwrap()
        .eigenvalue;
    let k0 = stability_eigenvalue(&g, &f, 64.0, 0.0, &ScalarField::zeros(&g), &e)
        .unwrap()
        .eigenvalue;
    assert!((k0 - mu).abs() < 1e-8 * mu);

    let d = disk(97);
    let z = FlowField::zero(&d);
    let solver = ExplosionSolver::new(FlowProblem::new(&d, &z, 0.0)).unwrap();
    let phi = solver
        .minimal_solution(1.0, &e, &MinimalSolutionOptions::default())
        .unwrap()
        .field
        .unwrap();
    assert!(solver.stability_eigenvalue(1.0, &phi, &e).unwrap().eigenvalue > 0.0);

    let t = solver.lambda_star(&e, &ThresholdOptions::default()).unwrap();
    let kappa = |frac: f64| {
        let l = frac * t.lambda_star;
        let phi = solver
            .minimal_solution(l, &e, &MinimalSolutionOptions::default())
            .unwrap()
            .field
            .unwrap();
        solver.stability_eigenvalue(l, &phi, &e).unwrap().eigenvalue
    };
    let (k_half, k_near) = (kappa(0.5), kappa(0.98));
    assert!(k_near < k_half && k_near > -1e-6, "{k_near} vs {k_half}");
}

#[test]
fn uniform_bound_examples() {
    let e = Nonlinearity::exponential();
    assert!((e.uniform_bound(0.5) - 0.916).abs() < 1e-3);
    let g = square(65);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let rep = uniform_bound_check(
        &g,
        &f,
        &[256.0],
        AdvectionScheme::Upwind,
        &e,
        0.25,
        &[0.0, 0.5, 1.0],
        &ThresholdOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.violations, 0);
    assert!(rep.worst_margin >= 0.0);
    assert!((rep.bound - e.uniform_bound(0.25)).abs() < 1e-15);
    let zero = rep.rows.iter().find(|r| r.lambda == 0.0).unwrap();
    assert_eq!(zero.sup_phi, 0.0);
    assert!(uniform_bound_check(&g, &f, &[0.0], AdvectionScheme::Upwind, &e, 1.0, &[], &ThresholdOptions::default()).is_err());
}

#[test]
fn equidistribution_of_streamline_functions() {
    let g = square(129);
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    assert_eq!(equidistribution_norm(&ScalarField::zeros(&g), &f).unwrap(), 0.0);
    let s = stream_function(&CatalogEntry::new("sinsin")).unwrap();
    let psi2 = ScalarField::from_fn(&g, |x, y| s.eval(x, y).powi(2));
    // scale: ‖u‖² ‖∇Ψ²‖² with both of order π²
    let scale = PI.powi(4);
    assert!(equidistribution_norm(&psi2, &f).unwrap() < 1e-8 * scale);
    let bump = ScalarField::from_fn(&g, |x, _| (PI * x).sin());
    assert!(equidistribution_norm(&bump, &f).unwrap() > 1.0);
}
